//! Landscape map rendering: one bubble per company with area proportional
//! to R&D spend, one diamond marker per technology, colors by cluster.

use super::model::LandscapeModel;

/// Fixed palette; clusters beyond its length wrap around.
pub const PALETTE: [&str; 12] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac", "#2f4b7c", "#a05195",
];

#[derive(Debug, Clone)]
pub struct SvgOptions {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    /// Base bubble radius added to the spend term.
    pub r_min: f64,
    /// Radius of the biggest spender; the √spend scale is derived from it.
    pub r_max: f64,
    /// How many companies (by spend) get text labels. Technologies are
    /// always labeled.
    pub label_top_m: usize,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            width: 1000.0,
            height: 760.0,
            margin: 60.0,
            r_min: 2.0,
            r_max: 26.0,
            label_top_m: 12,
        }
    }
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

/// Render the model as a standalone SVG 1.1 document. An empty model yields
/// a valid document with no markers.
pub fn render_svg(model: &LandscapeModel, options: &SvgOptions) -> String {
    let o = options;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        fmt2(o.width),
        fmt2(o.height),
        fmt2(o.width),
        fmt2(o.height)
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#fcfcfa\"/>\n",
        fmt2(o.width),
        fmt2(o.height)
    ));

    // Layout extents → viewport scaling, preserving aspect ratio.
    let (min_x, max_x) = model
        .entities
        .iter()
        .map(|e| e.x)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let (min_y, max_y) = model
        .entities
        .iter()
        .map(|e| e.y)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let span_x = (max_x - min_x).max(1e-9);
    let span_y = (max_y - min_y).max(1e-9);
    let scale = ((o.width - 2.0 * o.margin) / span_x).min((o.height - 2.0 * o.margin) / span_y);
    let place = |x: f64, y: f64| -> (f64, f64) {
        if model.entities.is_empty() {
            return (o.width / 2.0, o.height / 2.0);
        }
        let px = o.margin + (x - min_x) * scale + ((o.width - 2.0 * o.margin) - span_x * scale) / 2.0;
        // SVG y grows downward.
        let py = o.height
            - o.margin
            - (y - min_y) * scale
            - ((o.height - 2.0 * o.margin) - span_y * scale) / 2.0;
        (px, py)
    };

    let max_spend = model
        .companies()
        .filter_map(|c| c.rnd_meur)
        .fold(0.0f64, f64::max);
    let spend_scale = if max_spend > 0.0 {
        (o.r_max - o.r_min) / max_spend.sqrt()
    } else {
        0.0
    };
    let radius = |spend: f64| o.r_min + spend_scale * spend.max(0.0).sqrt();

    let color = |cluster: usize| PALETTE[cluster % PALETTE.len()];

    svg.push_str("  <g class=\"companies\">\n");
    for company in model.companies() {
        let (cx, cy) = place(company.x, company.y);
        let r = radius(company.rnd_meur.unwrap_or(0.0));
        svg.push_str(&format!(
            "    <circle class=\"company\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\" fill-opacity=\"0.72\" stroke=\"#40403c\" stroke-width=\"0.6\"><title>{}</title></circle>\n",
            fmt2(cx),
            fmt2(cy),
            fmt2(r),
            color(company.cluster),
            escape_xml(&company.name)
        ));
    }
    svg.push_str("  </g>\n");

    svg.push_str("  <g class=\"technologies\">\n");
    for tech in model.technologies() {
        let (cx, cy) = place(tech.x, tech.y);
        let half = 4.5;
        svg.push_str(&format!(
            "    <rect class=\"technology\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" transform=\"rotate(45 {} {})\" fill=\"{}\" stroke=\"#1f1f1d\" stroke-width=\"0.8\"><title>{}</title></rect>\n",
            fmt2(cx - half),
            fmt2(cy - half),
            fmt2(2.0 * half),
            fmt2(2.0 * half),
            fmt2(cx),
            fmt2(cy),
            color(tech.cluster),
            escape_xml(&tech.name)
        ));
    }
    svg.push_str("  </g>\n");

    // Labels: every technology, plus the top-m spenders.
    let mut spenders: Vec<&super::model::ModelEntity> = model.companies().collect();
    spenders.sort_by(|a, b| {
        b.rnd_meur
            .unwrap_or(0.0)
            .partial_cmp(&a.rnd_meur.unwrap_or(0.0))
            .unwrap()
            .then_with(|| a.entity_id.cmp(&b.entity_id))
    });
    svg.push_str("  <g class=\"labels\" font-family=\"sans-serif\" font-size=\"9\" fill=\"#222\">\n");
    for tech in model.technologies() {
        let (cx, cy) = place(tech.x, tech.y);
        svg.push_str(&format!(
            "    <text x=\"{}\" y=\"{}\">{}</text>\n",
            fmt2(cx + 6.0),
            fmt2(cy - 6.0),
            escape_xml(&tech.name)
        ));
    }
    for company in spenders.iter().take(options.label_top_m) {
        let (cx, cy) = place(company.x, company.y);
        let r = radius(company.rnd_meur.unwrap_or(0.0));
        svg.push_str(&format!(
            "    <text x=\"{}\" y=\"{}\" font-style=\"italic\">{}</text>\n",
            fmt2(cx + r + 2.0),
            fmt2(cy + 3.0),
            escape_xml(&company.name)
        ));
    }
    svg.push_str("  </g>\n");

    // Cluster legend.
    svg.push_str("  <g class=\"legend\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#222\">\n");
    for profile in &model.profiles {
        let y = 16.0 + profile.cluster as f64 * 14.0;
        let label = profile
            .label_candidates
            .first()
            .map(String::as_str)
            .unwrap_or("(empty)");
        svg.push_str(&format!(
            "    <rect x=\"8\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
            fmt2(y - 9.0),
            color(profile.cluster)
        ));
        svg.push_str(&format!(
            "    <text x=\"22\" y=\"{}\">cluster {}: {}</text>\n",
            fmt2(y),
            profile.cluster,
            escape_xml(label)
        ));
    }
    svg.push_str("  </g>\n");
    svg.push_str("</svg>\n");
    svg
}
