//! Deterministic SVG plots with companion CSV files.
//!
//! Coordinates are mapped to the canvas with exact rational arithmetic and
//! printed with six fixed decimals, so the output is byte-identical across
//! runs, platforms and thread counts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::metrics::{render_decimal, render_fixed, Histogram};
use crate::regress::Rational;

pub const WIDTH: i64 = 640;
pub const HEIGHT: i64 = 480;
const MARGIN: i64 = 64;
const TICKS: i64 = 5;
const TICK_DIGITS: usize = 6;
const COORD_DECIMALS: usize = 6;

/// Scatter plots keep at most this many points.
pub const MAX_POINTS: usize = 5000;

/// A rendered plot: the SVG document and its companion CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plot {
    pub svg: String,
    pub csv: String,
}

impl Plot {
    /// Writes the SVG to `path` and the CSV next to it with a `.csv`
    /// extension. Returns the CSV path.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        fs::write(path, &self.svg).map_err(|e| Error::io(path, e))?;
        let csv_path = path.with_extension("csv");
        fs::write(&csv_path, &self.csv).map_err(|e| Error::io(&csv_path, e))?;
        Ok(csv_path)
    }
}

/// Every `k`-th index with `k = ⌈len / max⌉`.
pub fn downsample_indices(len: usize, max: usize) -> Vec<usize> {
    if len == 0 || max == 0 {
        return Vec::new();
    }
    let k = len.div_ceil(max);
    (0..len).step_by(k).collect()
}

/// Exact decimal or `num/den` text for a rational.
pub fn exact_text(v: &Rational) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Affine map from `[lo, hi]` to `[a, b]` on the canvas.
struct Axis {
    lo: Rational,
    hi: Rational,
    a: Rational,
    b: Rational,
}

impl Axis {
    fn new(mut lo: Rational, mut hi: Rational, a: i64, b: i64) -> Self {
        if lo == hi {
            lo -= Rational::one();
            hi += Rational::one();
        }
        Self {
            lo,
            hi,
            a: int(a),
            b: int(b),
        }
    }

    fn map(&self, v: &Rational) -> Rational {
        &self.a + (v - &self.lo) * (&self.b - &self.a) / (&self.hi - &self.lo)
    }

    fn ticks(&self) -> Vec<Rational> {
        (0..=TICKS)
            .map(|i| &self.lo + (&self.hi - &self.lo) * Rational::new(i.into(), TICKS.into()))
            .collect()
    }
}

fn fx(v: &Rational) -> String {
    render_fixed(v, COORD_DECIMALS)
}

fn bounds<'a>(values: impl Iterator<Item = &'a Rational>) -> Option<(Rational, Rational)> {
    let mut it = values;
    let first = it.next()?.clone();
    let (mut lo, mut hi) = (first.clone(), first);
    for v in it {
        if *v < lo {
            lo = v.clone();
        }
        if *v > hi {
            hi = v.clone();
        }
    }
    Some((lo, hi))
}

/// Least-squares line `y = a + b·x`; `None` when all x coincide.
pub fn ols_line(xs: &[Rational], ys: &[Rational]) -> Option<(Rational, Rational)> {
    let n = int(xs.len() as i64);
    let sx: Rational = xs.iter().sum();
    let sy: Rational = ys.iter().sum();
    let sxx: Rational = xs.iter().map(|x| x * x).sum();
    let sxy: Rational = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let det = &n * &sxx - &sx * &sx;
    if det.is_zero() {
        return None;
    }
    let b = (&n * &sxy - &sx * &sy) / &det;
    let a = (sy - &b * sx) / n;
    Some((a, b))
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"10\">"
    );
    let _ = writeln!(out, "<title>{title}</title>");
    let _ = writeln!(out, "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        WIDTH - 2 * MARGIN,
        HEIGHT - 2 * MARGIN
    );
}

fn axes(out: &mut String, x: &Axis, y: &Axis, x_label: &str, y_label: &str) {
    for t in x.ticks() {
        let px = fx(&x.map(&t));
        let _ = writeln!(
            out,
            "<line x1=\"{px}\" y1=\"{b}\" x2=\"{px}\" y2=\"{b2}\" stroke=\"black\"/><text x=\"{px}\" y=\"{ty}\" text-anchor=\"middle\">{}</text>",
            render_decimal(&t, TICK_DIGITS),
            b = HEIGHT - MARGIN,
            b2 = HEIGHT - MARGIN + 4,
            ty = HEIGHT - MARGIN + 16,
        );
    }
    for t in y.ticks() {
        let py = fx(&y.map(&t));
        let _ = writeln!(
            out,
            "<line x1=\"{l2}\" y1=\"{py}\" x2=\"{MARGIN}\" y2=\"{py}\" stroke=\"black\"/><text x=\"{tx}\" y=\"{py}\" text-anchor=\"end\">{}</text>",
            render_decimal(&t, TICK_DIGITS),
            l2 = MARGIN - 4,
            tx = MARGIN - 6,
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>",
        WIDTH / 2,
        HEIGHT - 16
    );
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{y_label}</text>",
        HEIGHT / 2,
        HEIGHT / 2
    );
}

/// Predicted against true values, downsampled to [`MAX_POINTS`], with the
/// least-squares line of predicted on true.
pub fn scatter(true_values: &[Rational], predicted: &[Rational]) -> Result<Plot> {
    if true_values.len() != predicted.len() {
        return Err(Error::domain(format!(
            "scatter needs paired values, got {} and {}",
            true_values.len(),
            predicted.len()
        )));
    }
    if true_values.is_empty() {
        return Err(Error::domain("scatter of an empty series"));
    }
    let idx = downsample_indices(true_values.len(), MAX_POINTS);
    let xs: Vec<Rational> = idx.iter().map(|&i| true_values[i].clone()).collect();
    let ys: Vec<Rational> = idx.iter().map(|&i| predicted[i].clone()).collect();

    let (x_lo, x_hi) = bounds(xs.iter()).expect("nonempty");
    let line = ols_line(&xs, &ys);
    let line_ends = line
        .as_ref()
        .map(|(a, b)| (a + b * &x_lo, a + b * &x_hi));
    let extra: Vec<Rational> = line_ends.iter().flat_map(|(l, r)| [l.clone(), r.clone()]).collect();
    let (y_lo, y_hi) = bounds(ys.iter().chain(&extra)).expect("nonempty");
    let x_axis = Axis::new(x_lo.clone(), x_hi.clone(), MARGIN, WIDTH - MARGIN);
    let y_axis = Axis::new(y_lo, y_hi, HEIGHT - MARGIN, MARGIN);

    let mut csv = String::from("true,predicted\n");
    for (x, y) in xs.iter().zip(&ys) {
        let _ = writeln!(csv, "{},{}", exact_text(x), exact_text(y));
    }

    let mut svg = String::new();
    header(&mut svg, "predicted vs true");
    axes(&mut svg, &x_axis, &y_axis, "true", "predicted");
    svg.push_str("<g fill=\"steelblue\" fill-opacity=\"0.5\">\n");
    for (x, y) in xs.iter().zip(&ys) {
        let _ = writeln!(
            svg,
            "<circle cx=\"{}\" cy=\"{}\" r=\"1.5\"/>",
            fx(&x_axis.map(x)),
            fx(&y_axis.map(y))
        );
    }
    svg.push_str("</g>\n");
    if let (Some((a, b)), Some((l, r))) = (&line, &line_ends) {
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"crimson\" data-intercept=\"{}\" data-slope=\"{}\"/>",
            fx(&x_axis.map(&x_lo)),
            fx(&y_axis.map(l)),
            fx(&x_axis.map(&x_hi)),
            fx(&y_axis.map(r)),
            exact_text(a),
            exact_text(b)
        );
    }
    let _ = write!(svg, "<!--\n{csv}-->\n</svg>\n");
    Ok(Plot { svg, csv })
}

/// Bars proportional to bin counts, with a marker at zero when zero lies in
/// range.
pub fn histogram_plot(hist: &Histogram) -> Result<Plot> {
    if hist.counts.is_empty() || hist.edges.len() != hist.counts.len() + 1 {
        return Err(Error::domain("malformed histogram"));
    }
    let x_axis = Axis::new(
        hist.edges[0].clone(),
        hist.edges[hist.edges.len() - 1].clone(),
        MARGIN,
        WIDTH - MARGIN,
    );
    let top = hist.counts.iter().copied().max().unwrap_or(0).max(1);
    let y_axis = Axis::new(Rational::zero(), int(top as i64), HEIGHT - MARGIN, MARGIN);

    let mut csv = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in hist.counts.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{c}", exact_text(&hist.edges[i]), exact_text(&hist.edges[i + 1]));
    }

    let mut svg = String::new();
    header(&mut svg, "residual histogram");
    axes(&mut svg, &x_axis, &y_axis, "residual", "count");
    svg.push_str("<g fill=\"steelblue\" stroke=\"white\" stroke-width=\"0.5\">\n");
    let base = y_axis.map(&Rational::zero());
    for (i, c) in hist.counts.iter().enumerate() {
        let left = x_axis.map(&hist.edges[i]);
        let right = x_axis.map(&hist.edges[i + 1]);
        let y = y_axis.map(&int(*c as i64));
        let _ = writeln!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>",
            fx(&left),
            fx(&y),
            fx(&(&right - &left)),
            fx(&(&base - &y))
        );
    }
    svg.push_str("</g>\n");
    let zero = Rational::zero();
    if hist.edges[0] <= zero && zero <= hist.edges[hist.edges.len() - 1] {
        let px = fx(&x_axis.map(&zero));
        let _ = writeln!(
            svg,
            "<line x1=\"{px}\" y1=\"{MARGIN}\" x2=\"{px}\" y2=\"{}\" stroke=\"crimson\" stroke-dasharray=\"4 2\"/>",
            HEIGHT - MARGIN
        );
    }
    let _ = write!(svg, "<!--\n{csv}-->\n</svg>\n");
    Ok(Plot { svg, csv })
}

/// Renders [`scatter`] to `path` plus its companion CSV.
pub fn scatter_svg(true_values: &[Rational], predicted: &[Rational], path: &Path) -> Result<Plot> {
    let plot = scatter(true_values, predicted)?;
    plot.write(path)?;
    Ok(plot)
}

/// Renders [`histogram_plot`] to `path` plus its companion CSV.
pub fn histogram_svg(hist: &Histogram, path: &Path) -> Result<Plot> {
    let plot = histogram_plot(hist)?;
    plot.write(path)?;
    Ok(plot)
}
