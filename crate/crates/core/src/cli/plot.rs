//! PCA projection to the plane and a dependency-free SVG scatter.

use std::fmt::Write as _;

use crate::clustering::{jacobi_eigen, SymmetricMatrix};
use crate::error::{Error, Result};

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];
const NOISE_COLOR: &str = "#c8c8c8";

/// Projects rows onto the two leading principal axes. Each axis is signed so
/// that its largest-magnitude loading is positive, which keeps the layout
/// stable across runs.
pub fn pca_2d(rows: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::EmptyDataset("no latent vectors to plot".into()));
    }
    if d < 2 {
        return Err(Error::Config(format!(
            "plotting needs at least 2 latent dimensions, got {d}"
        )));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != d) {
        return Err(Error::Shape(format!(
            "row {i} has {} values, expected {d}",
            rows[i].len()
        )));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let cov = SymmetricMatrix::from_fn(d, |a, b| {
        rows.iter()
            .map(|r| (r[a] - mean[a]) * (r[b] - mean[b]))
            .sum::<f64>()
            / n as f64
    });
    let eig = jacobi_eigen(&cov)?;
    let axes: Vec<Vec<f64>> = eig.vectors[..2]
        .iter()
        .map(|v| {
            let big = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if big < 0.0 {
                v.iter().map(|x| -x).collect()
            } else {
                v.clone()
            }
        })
        .collect();
    Ok(rows
        .iter()
        .map(|r| {
            let c: Vec<f64> = r.iter().zip(&mean).map(|(x, m)| x - m).collect();
            let dot = |axis: &[f64]| axis.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
            [dot(&axes[0]), dot(&axes[1])]
        })
        .collect())
}

/// Scatter plot with one color per label; `usize::MAX` marks noise. Without
/// labels every point shares one color.
pub fn scatter_svg(points: &[[f64; 2]], labels: Option<&[usize]>) -> String {
    let (w, h, margin) = (640.0, 480.0, 40.0);
    let (mut x0, mut x1, mut y0, mut y1) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let (sx, sy) = (
        (w - 2.0 * margin) / span(x0, x1),
        (h - 2.0 * margin) / span(y0, y1),
    );

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        w - 2.0 * margin,
        h - 2.0 * margin
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">PC1</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">PC2</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, p) in points.iter().enumerate() {
        let color = match labels.map(|l| l[i]) {
            Some(usize::MAX) => NOISE_COLOR,
            Some(l) => PALETTE[l % PALETTE.len()],
            None => PALETTE[0],
        };
        let cx = margin + (p[0] - x0) * sx;
        let cy = h - margin - (p[1] - y0) * sy;
        let _ = writeln!(
            svg,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{color}" fill-opacity="0.8"/>"#
        );
    }
    if let Some(labels) = labels {
        let mut classes: Vec<usize> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        for (row, &c) in classes.iter().enumerate() {
            let (color, name) = if c == usize::MAX {
                (NOISE_COLOR, "noise".to_string())
            } else {
                (PALETTE[c % PALETTE.len()], c.to_string())
            };
            let y = margin + 14.0 * row as f64 + 10.0;
            let _ = writeln!(
                svg,
                r#"<circle cx="{}" cy="{}" r="4" fill="{color}"/>"#,
                w - margin - 40.0,
                y - 4.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{y}" font-size="11">{name}</text>"#,
                w - margin - 32.0
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dimensional_input_is_rotated_only() {
        let rows = vec![vec![0.0, 0.0], vec![4.0, 0.0], vec![0.0, 1.0], vec![4.0, 1.0]];
        let p = pca_2d(&rows).unwrap();
        // distances between points survive a rotation
        for i in 0..4 {
            for j in 0..4 {
                let a = ((rows[i][0] - rows[j][0]).powi(2) + (rows[i][1] - rows[j][1]).powi(2)).sqrt();
                let b = ((p[i][0] - p[j][0]).powi(2) + (p[i][1] - p[j][1]).powi(2)).sqrt();
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn one_dimension_rejected() {
        assert!(pca_2d(&[vec![1.0], vec![2.0]]).unwrap_err().is_config());
    }

    #[test]
    fn color_groups() {
        let rows: Vec<Vec<f64>> = (0..210)
            .map(|i| {
                (0..10)
                    .map(|j| ((i * 7 + j * 3) % 11) as f64 + (i % 7) as f64 * 5.0)
                    .collect()
            })
            .collect();
        let labels: Vec<usize> = (0..210).map(|i| i % 7).collect();
        let svg = scatter_svg(&pca_2d(&rows).unwrap(), Some(&labels));
        let used: std::collections::BTreeSet<&str> =
            PALETTE.iter().copied().filter(|c| svg.contains(c)).collect();
        assert_eq!(used.len(), 7);
        assert_eq!(svg, scatter_svg(&pca_2d(&rows).unwrap(), Some(&labels)));

        let plain = scatter_svg(&pca_2d(&rows).unwrap(), None);
        assert!(PALETTE[1..].iter().all(|c| !plain.contains(c)));
    }
}
