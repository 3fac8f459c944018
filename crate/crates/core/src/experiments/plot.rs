use crate::qd::io::parse_bounds;
use crate::qd::io::ArchiveFile;

use super::svg::{color, Panel, Svg};

/// Scatter of two descriptor dimensions of an archive, coloured by fitness.
/// Axis ranges come from the archive's stored bounds when present.
pub fn plot_archive(file: &ArchiveFile<f64>, dims: [usize; 2]) -> Result<String, String> {
    if let Some(&d) = dims.iter().find(|&&d| d >= file.bd_dim) {
        return Err(format!("projection dimension {d} out of range: the archive has {} descriptor dimensions", file.bd_dim));
    }
    let stored = file.meta("bounds").map(parse_bounds::<f64>).transpose()?;
    let range = |d: usize| -> (f64, f64) {
        if let Some(b) = stored.as_ref().and_then(|b| b.get(d)) {
            return *b;
        }
        let lo = file.elites.iter().map(|e| e.bd[d]).fold(f64::INFINITY, f64::min);
        let hi = file.elites.iter().map(|e| e.bd[d]).fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi > lo {
            (lo, hi)
        } else if lo.is_finite() {
            (lo - 0.5, lo + 0.5)
        } else {
            (0.0, 1.0)
        }
    };
    let panel = Panel { x0: 60.0, y0: 20.0, size: 400.0, xr: range(dims[0]), yr: range(dims[1]) };
    let mut svg = Svg::new(520.0, 480.0);
    panel.axes(&mut svg, &format!("bd[{}]", dims[0]), &format!("bd[{}]", dims[1]), true);
    let fmin = file.elites.iter().map(|e| e.fitness).fold(f64::INFINITY, f64::min);
    let fmax = file.elites.iter().map(|e| e.fitness).fold(f64::NEG_INFINITY, f64::max);
    for e in &file.elites {
        let t = if fmax > fmin { (e.fitness - fmin) / (fmax - fmin) } else { 1.0 };
        svg.circle(panel.px(e.bd[dims[0]]), panel.py(e.bd[dims[1]]), 2.0, &color(t));
    }
    Ok(svg.finish())
}
