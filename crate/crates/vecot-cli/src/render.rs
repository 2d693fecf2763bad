//! SVG rendering of labeled 2d instances: one filled circle per point,
//! radius proportional to the square root of its weight, fill color by
//! agent from a fixed 12-color palette, unsold points hollow. The element
//! count is exactly the point count plus the background rectangle.

use vecot::measure::LayeredMeasure;

pub const PALETTE: [&str; 12] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac", "#2f4b7c", "#a05195",
];

const CANVAS: f64 = 640.0;

pub fn render_svg(m: &LayeredMeasure, labels: &[usize]) -> Result<String, String> {
    if m.dim() != 2 {
        return Err(format!("render needs 2d coordinates, instance has d = {}", m.dim()));
    }
    if labels.len() != m.num_points() {
        return Err(format!(
            "labels cover {} points, instance has {}",
            labels.len(),
            m.num_points()
        ));
    }
    let xs: Vec<f64> = m.points().iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = m.points().iter().map(|p| p[1]).collect();
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let extent = (x1 - x0).max(y1 - y0).max(1e-9);
    let pad = 0.1 * extent;
    let scale = CANVAS / (extent + 2.0 * pad);
    let max_w = m.weights().iter().cloned().fold(0.0f64, f64::max);
    let r_unit = 0.045 * CANVAS / max_w.sqrt().max(1e-12);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{c}\" height=\"{c}\" viewBox=\"0 0 {c} {c}\">\n",
        c = CANVAS
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{c}\" height=\"{c}\" fill=\"#ffffff\"/>\n",
        c = CANVAS
    ));
    for (t, p) in m.points().iter().enumerate() {
        let cx = (p[0] - x0 + pad) * scale;
        // flip y so larger coordinates draw upward
        let cy = CANVAS - (p[1] - y0 + pad) * scale;
        let r = r_unit * m.weight(t).sqrt();
        let label = labels[t];
        if label == 0 {
            svg.push_str(&format!(
                "  <circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"{r:.3}\" fill=\"none\" stroke=\"#444444\" stroke-width=\"1.5\"/>\n"
            ));
        } else {
            let color = PALETTE[(label - 1) % PALETTE.len()];
            svg.push_str(&format!(
                "  <circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"{r:.3}\" fill=\"{color}\"/>\n"
            ));
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_render_element_count() {
        let m = LayeredMeasure::build(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 2.0, 0.5],
            vec![vec![1.0], vec![1.0], vec![1.0]],
        )
        .unwrap();
        let svg = render_svg(&m, &[1, 2, 0]).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<rect").count(), 1);
        assert_eq!(svg.matches("fill=\"none\"").count(), 1);
    }

    #[test]
    fn non_planar_rejected() {
        let m = LayeredMeasure::build(vec![vec![0.0]], vec![1.0], vec![vec![1.0]]).unwrap();
        assert!(render_svg(&m, &[0]).is_err());
    }
}
