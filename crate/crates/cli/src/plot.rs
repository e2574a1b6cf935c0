//! Dependency-free SVG rendering for the four report figures.
//!
//! Every chart is a single self-contained SVG string: inline styling, no
//! external assets, and each plotted value repeated as a text label so the
//! files can be diffed meaningfully.

use anyhow::{bail, Result};

use crate::report::Table;

pub const VALID_KINDS: [&str; 4] = ["fig1", "fig2", "fig3", "fig4"];

const WIDTH: f64 = 840.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 70.0;

const SERIES_COLORS: [&str; 5] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3"];

/// Renders the named figure from its table. Unknown kinds are rejected with
/// the list of valid kinds; empty tables are rejected outright.
pub fn render_plot(kind: &str, table: &Table) -> Result<String> {
    if table.is_empty() {
        bail!("cannot plot {kind}: table is empty");
    }
    match kind {
        "fig1" => render_fig1(table),
        "fig2" => render_fig2(table),
        "fig3" => render_fig3(table),
        "fig4" => render_fig4(table),
        other => bail!(
            "unknown plot kind {:?}: valid kinds are {}",
            other,
            VALID_KINDS.join(", ")
        ),
    }
}

/// Generalization error per model with ±1 standard-deviation whiskers.
fn render_fig1(table: &Table) -> Result<String> {
    let labels = table.text_column("model")?;
    let means = table.numeric_column("mean_error")?;
    let stds = table.numeric_column("std_error")?;
    bar_chart(
        "Generalization error across seeded re-splits",
        "test error",
        &labels,
        &means,
        Some(&stds),
    )
}

/// Final meta-model loss per stacking input configuration.
fn render_fig2(table: &Table) -> Result<String> {
    let labels = table.text_column("meta_inputs")?;
    let losses = table.numeric_column("final_mean_loss")?;
    bar_chart(
        "Stacked meta-model loss by input configuration",
        "mean squared error",
        &labels,
        &losses,
        None,
    )
}

/// Mutual-information values: original vs extracted feature sets, then the
/// per-model score informativeness.
fn render_fig3(table: &Table) -> Result<String> {
    let subjects = table.text_column("subject")?;
    let originals = table.numeric_column("i_original")?;
    let extracted = table.numeric_column("i_extracted")?;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for i in 0..subjects.len() {
        if originals[i].is_finite() {
            let label = if extracted[i].is_finite() {
                format!("{} (original)", subjects[i])
            } else {
                subjects[i].clone()
            };
            labels.push(label);
            values.push(originals[i]);
        }
        if extracted[i].is_finite() {
            labels.push(format!("{} (extracted)", subjects[i]));
            values.push(extracted[i]);
        }
    }
    if labels.is_empty() {
        bail!("cannot plot fig3: no finite mutual-information values");
    }
    bar_chart(
        "Mutual information with the diagnosis target",
        "mutual information (nats)",
        &labels,
        &values,
        None,
    )
}

/// Optimization trace: incumbent objective and expected improvement per
/// iteration, the EI line carrying the surrogate's own uncertainty as
/// whiskers, with restart events marked.
fn render_fig4(table: &Table) -> Result<String> {
    let iterations = table.numeric_column("iteration")?;
    let incumbents = table.numeric_column("incumbent")?;
    let max_ei = table.numeric_column("max_ei")?;
    let sigma = table
        .numeric_column("proposal_sigma")
        .unwrap_or_else(|_| vec![f64::NAN; iterations.len()]);
    let restarts: Vec<bool> = table
        .text_column("restart_event")
        .map(|col| col.iter().map(|c| c == "true").collect())
        .unwrap_or_else(|_| vec![false; iterations.len()]);
    line_chart(
        "Hyperparameter search trace",
        "iteration",
        &iterations,
        &[
            Series {
                name: "incumbent objective",
                values: &incumbents,
                whiskers: None,
            },
            Series {
                name: "max expected improvement",
                values: &max_ei,
                whiskers: Some(&sigma),
            },
        ],
        &restarts,
    )
}

struct Series<'a> {
    name: &'a str,
    values: &'a [f64],
    whiskers: Option<&'a [f64]>,
}

fn svg_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Short label form of a value: enough digits to identify it on the chart
/// (full precision lives in the CSVs).
fn label_value(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 0.01 && v.abs() < 10_000.0 {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let span = (self.x_max - self.x_min).max(f64::MIN_POSITIVE);
        MARGIN_LEFT + (v - self.x_min) / span * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let span = (self.y_max - self.y_min).max(f64::MIN_POSITIVE);
        HEIGHT - MARGIN_BOTTOM - (v - self.y_min) / span * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn svg_header(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\" font-family=\"Helvetica, Arial, sans-serif\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n",
            "<text x=\"{cx}\" y=\"28\" text-anchor=\"middle\" font-size=\"16\" fill=\"#222222\">{t}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        cx = WIDTH / 2.0,
        t = svg_escape(title)
    )
}

fn axis_lines(frame: &Frame, y_label: &str) -> String {
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let mut out = format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"#333333\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"#333333\"/>\n"
    );
    // Four horizontal gridlines with tick labels.
    for i in 0..=4 {
        let v = frame.y_min + (frame.y_max - frame.y_min) * f64::from(i) / 4.0;
        let y = frame.y(v);
        out.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{y:.2}\" x2=\"{x1}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>\n\
             <text x=\"{tx}\" y=\"{ty:.2}\" text-anchor=\"end\" font-size=\"10\" fill=\"#444444\">{label}</text>\n",
            tx = x0 - 6.0,
            ty = y + 3.0,
            label = svg_escape(&label_value(v)),
        ));
    }
    out.push_str(&format!(
        "<text x=\"18\" y=\"{cy}\" text-anchor=\"middle\" font-size=\"12\" fill=\"#222222\" \
         transform=\"rotate(-90 18 {cy})\">{label}</text>\n",
        cy = (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0,
        label = svg_escape(y_label),
    ));
    out
}

/// Pads [lo, hi] so bars/lines don't touch the frame; always includes zero
/// for bar charts so bar area is proportional to value.
fn padded_range(values: impl Iterator<Item = f64>, include_zero: bool) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if include_zero {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    if lo == hi {
        let pad = lo.abs().max(1.0) * 0.1;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.08;
    (
        if include_zero && lo == 0.0 { 0.0 } else { lo - pad },
        hi + pad,
    )
}

fn bar_chart(
    title: &str,
    y_label: &str,
    labels: &[String],
    values: &[f64],
    whiskers: Option<&[f64]>,
) -> Result<String> {
    if labels.len() != values.len() || labels.is_empty() {
        bail!("bar chart needs matching nonempty labels and values");
    }
    let whisker_hi = |i: usize| values[i] + whiskers.map_or(0.0, |w| w[i].max(0.0));
    let whisker_lo = |i: usize| values[i] - whiskers.map_or(0.0, |w| w[i].max(0.0));
    let (y_min, y_max) = padded_range(
        (0..values.len()).flat_map(|i| [whisker_lo(i), whisker_hi(i)]),
        true,
    );
    let frame = Frame {
        x_min: 0.0,
        x_max: labels.len() as f64,
        y_min,
        y_max,
    };
    let mut svg = svg_header(title);
    svg.push_str(&axis_lines(&frame, y_label));

    let slot = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / labels.len() as f64;
    let bar_width = slot * 0.6;
    let zero_y = frame.y(0.0);
    for (i, (label, &value)) in labels.iter().zip(values).enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let cx = frame.x(i as f64 + 0.5);
        let x = cx - bar_width / 2.0;
        let vy = frame.y(value);
        let (top, height) = if value >= 0.0 {
            (vy, zero_y - vy)
        } else {
            (zero_y, vy - zero_y)
        };
        svg.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{top:.2}\" width=\"{bar_width:.2}\" height=\"{h:.2}\" \
             fill=\"{color}\" fill-opacity=\"0.85\"/>\n",
            h = height.max(0.0),
        ));
        if let Some(w) = whiskers {
            if w[i].is_finite() && w[i] > 0.0 {
                let hi = frame.y(value + w[i]);
                let lo = frame.y(value - w[i]);
                let cap = bar_width * 0.3;
                svg.push_str(&format!(
                    "<line x1=\"{cx:.2}\" y1=\"{hi:.2}\" x2=\"{cx:.2}\" y2=\"{lo:.2}\" stroke=\"#222222\" stroke-width=\"1.5\"/>\n\
                     <line x1=\"{xa:.2}\" y1=\"{hi:.2}\" x2=\"{xb:.2}\" y2=\"{hi:.2}\" stroke=\"#222222\" stroke-width=\"1.5\"/>\n\
                     <line x1=\"{xa:.2}\" y1=\"{lo:.2}\" x2=\"{xb:.2}\" y2=\"{lo:.2}\" stroke=\"#222222\" stroke-width=\"1.5\"/>\n",
                    xa = cx - cap,
                    xb = cx + cap,
                ));
            }
        }
        // Value label above the whisker/bar, category label below the axis.
        let label_y = frame.y(whisker_hi(i).max(value.max(0.0))) - 6.0;
        svg.push_str(&format!(
            "<text x=\"{cx:.2}\" y=\"{label_y:.2}\" text-anchor=\"middle\" font-size=\"10\" fill=\"#222222\">{v}</text>\n\
             <text x=\"{cx:.2}\" y=\"{cat_y:.2}\" text-anchor=\"middle\" font-size=\"11\" fill=\"#222222\">{cat}</text>\n",
            v = svg_escape(&label_value(value)),
            cat_y = HEIGHT - MARGIN_BOTTOM + 18.0,
            cat = svg_escape(label),
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn line_chart(
    title: &str,
    x_label: &str,
    xs: &[f64],
    series: &[Series<'_>],
    restart_marks: &[bool],
) -> Result<String> {
    if xs.is_empty() || series.is_empty() {
        bail!("line chart needs nonempty x values and at least one series");
    }
    for s in series {
        if s.values.len() != xs.len() {
            bail!("series {:?} length does not match x axis", s.name);
        }
    }
    let all_values = series.iter().flat_map(|s| {
        s.values.iter().enumerate().flat_map(move |(i, &v)| {
            let w = s
                .whiskers
                .and_then(|w| w.get(i).copied())
                .filter(|w| w.is_finite())
                .unwrap_or(0.0);
            [v - w, v + w]
        })
    });
    let (y_min, y_max) = padded_range(all_values, false);
    let (x_min, x_max) = padded_range(xs.iter().copied(), false);
    let frame = Frame {
        x_min,
        x_max,
        y_min,
        y_max,
    };
    let mut svg = svg_header(title);
    svg.push_str(&axis_lines(&frame, "value"));

    // Restart markers first so the data lines draw over them.
    for (i, &mark) in restart_marks.iter().enumerate() {
        if mark && i < xs.len() {
            let x = frame.x(xs[i]);
            svg.push_str(&format!(
                "<line x1=\"{x:.2}\" y1=\"{y1}\" x2=\"{x:.2}\" y2=\"{y0}\" \
                 stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n\
                 <text x=\"{x:.2}\" y=\"{ty}\" text-anchor=\"middle\" font-size=\"9\" fill=\"#666666\">restart</text>\n",
                y1 = MARGIN_TOP,
                y0 = HEIGHT - MARGIN_BOTTOM,
                ty = MARGIN_TOP + 10.0,
            ));
        }
    }

    for (si, s) in series.iter().enumerate() {
        let color = SERIES_COLORS[si % SERIES_COLORS.len()];
        let mut path = String::new();
        let mut pen_down = false;
        for (i, (&x, &v)) in xs.iter().zip(s.values).enumerate() {
            if !v.is_finite() {
                pen_down = false;
                continue;
            }
            let px = frame.x(x);
            let py = frame.y(v);
            path.push_str(&format!(
                "{}{px:.2} {py:.2} ",
                if pen_down { "L" } else { "M" }
            ));
            pen_down = true;
            if let Some(w) = s.whiskers {
                if w[i].is_finite() && w[i] > 0.0 {
                    let hi = frame.y(v + w[i]);
                    let lo = frame.y(v - w[i]);
                    svg.push_str(&format!(
                        "<line x1=\"{px:.2}\" y1=\"{hi:.2}\" x2=\"{px:.2}\" y2=\"{lo:.2}\" \
                         stroke=\"{color}\" stroke-width=\"1\" stroke-opacity=\"0.7\"/>\n\
                         <line x1=\"{xa:.2}\" y1=\"{hi:.2}\" x2=\"{xb:.2}\" y2=\"{hi:.2}\" stroke=\"{color}\" stroke-opacity=\"0.7\"/>\n\
                         <line x1=\"{xa:.2}\" y1=\"{lo:.2}\" x2=\"{xb:.2}\" y2=\"{lo:.2}\" stroke=\"{color}\" stroke-opacity=\"0.7\"/>\n",
                        xa = px - 3.0,
                        xb = px + 3.0,
                    ));
                }
            }
            svg.push_str(&format!(
                "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"2.5\" fill=\"{color}\"/>\n\
                 <text x=\"{px:.2}\" y=\"{ty:.2}\" text-anchor=\"middle\" font-size=\"7\" fill=\"#555555\">{v}</text>\n",
                ty = py - 5.0,
                v = svg_escape(&label_value(v)),
            ));
        }
        svg.push_str(&format!(
            "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n"
        ));
        // Legend entry.
        let ly = MARGIN_TOP + 16.0 * si as f64;
        svg.push_str(&format!(
            "<rect x=\"{lx}\" y=\"{ry:.2}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n\
             <text x=\"{tx}\" y=\"{ty:.2}\" font-size=\"11\" fill=\"#222222\">{name}</text>\n",
            lx = WIDTH - MARGIN_RIGHT - 220.0,
            ry = ly - 10.0,
            tx = WIDTH - MARGIN_RIGHT - 202.0,
            ty = ly,
            name = svg_escape(s.name),
        ));
    }

    svg.push_str(&format!(
        "<text x=\"{cx}\" y=\"{y}\" text-anchor=\"middle\" font-size=\"12\" fill=\"#222222\">{label}</text>\n",
        cx = (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        y = HEIGHT - 20.0,
        label = svg_escape(x_label),
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}
