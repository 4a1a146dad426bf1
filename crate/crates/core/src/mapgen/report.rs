//! Human-readable CommonMark report over the assembled model: decisions in
//! force, resolution outcome, cluster profiles, top-k linkage tables both
//! ways, theme-filtered matches, and the validation summary.

use std::collections::BTreeMap;

use crate::sigfig::format_sig9;
use crate::similarity::Direction;

use super::model::LandscapeModel;

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

fn table_row(cells: &[String], out: &mut String) {
    out.push('|');
    for cell in cells {
        out.push(' ');
        out.push_str(cell);
        out.push_str(" |");
    }
    out.push('\n');
}

fn table_header(cells: &[&str], out: &mut String) {
    table_row(&cells.iter().map(|c| c.to_string()).collect::<Vec<_>>(), out);
    out.push('|');
    for _ in cells {
        out.push_str(" --- |");
    }
    out.push('\n');
}

fn opt_stat(v: Option<f64>) -> String {
    v.map_or("n/a".to_string(), format_sig9)
}

/// Render the full report. `top_k` controls the width of the per-entity
/// linkage tables.
pub fn report_markdown(model: &LandscapeModel, top_k: usize) -> String {
    let mut out = String::new();
    out.push_str("# Technology / R&D company linkage report\n\n");

    out.push_str("## Decisions in force\n\n");
    table_header(&["setting", "value"], &mut out);
    for (key, value) in &model.decisions {
        table_row(&[md_escape(key), md_escape(value)], &mut out);
    }
    out.push('\n');

    out.push_str("## Resolution\n\n");
    let meta = &model.metadata;
    out.push_str(&format!(
        "Technologies: {} of {} resolved. Companies: {} of {} resolved.\n\n",
        model.technologies().count(),
        meta.technologies_total,
        model.companies().count(),
        meta.companies_total,
    ));
    if meta.unresolved.is_empty() {
        out.push_str("All roster entries resolved against the embedding store.\n\n");
    } else {
        table_header(&["kind", "entity", "wiki title", "reason"], &mut out);
        for u in &meta.unresolved {
            table_row(
                &[
                    u.kind.as_str().to_string(),
                    md_escape(&u.entity_id),
                    md_escape(&u.wiki_title),
                    md_escape(&u.reason),
                ],
                &mut out,
            );
        }
        out.push('\n');
    }
    if meta.alignment.rank_deficient {
        out.push_str(&format!(
            "Warning: anchor cross-product rank {} is below the embedding dimension {}; the fitted map is not unique.\n\n",
            meta.alignment.rank, meta.embedding_dimension
        ));
    }
    out.push_str(&format!(
        "Alignment: mode {}, {} anchors, residual {}.\n\n",
        meta.alignment.mode,
        meta.alignment.anchor_count,
        format_sig9(meta.alignment.residual)
    ));
    out.push_str(
        "Clustering runs in the full embedding dimension; the 2D projection is fitted afterwards for display only.\n\n",
    );

    out.push_str("## Cluster profiles\n\n");
    table_header(
        &["cluster", "members", "technologies", "companies", "R&D (M EUR)", "label candidates"],
        &mut out,
    );
    for p in &model.profiles {
        table_row(
            &[
                p.cluster.to_string(),
                p.members.to_string(),
                p.technologies.to_string(),
                p.companies.to_string(),
                format_sig9(p.rnd_meur_total),
                md_escape(&p.label_candidates.join("; ")),
            ],
            &mut out,
        );
    }
    out.push('\n');

    let name_of = |id: &str| model.entity_name(id).unwrap_or(id).to_string();
    let neighbor_cell = |id: &str, sim: f64| {
        format!("{} ({})", md_escape(&name_of(id)), format_sig9(sim))
    };

    out.push_str(&format!("## Closest technologies per company (top {top_k})\n\n"));
    let rank_headers: Vec<String> = (1..=top_k).map(|i| i.to_string()).collect();
    let mut headers = vec!["company".to_string()];
    headers.extend(rank_headers.iter().cloned());
    table_row(&headers, &mut out);
    out.push('|');
    for _ in 0..=top_k {
        out.push_str(" --- |");
    }
    out.push('\n');
    for company in model.companies() {
        let neighbors = model
            .similarity
            .top_k(&company.entity_id, Direction::CompanyToTechs, top_k)
            .expect("company id is on the matrix axis");
        let mut cells = vec![md_escape(&company.name)];
        cells.extend(
            neighbors
                .neighbors
                .iter()
                .map(|(id, sim)| neighbor_cell(id, *sim)),
        );
        while cells.len() < top_k + 1 {
            cells.push(String::new());
        }
        table_row(&cells, &mut out);
    }
    out.push('\n');

    out.push_str(&format!("## Closest companies per technology (top {top_k})\n\n"));
    let mut headers = vec!["technology".to_string()];
    headers.extend(rank_headers.iter().cloned());
    table_row(&headers, &mut out);
    out.push('|');
    for _ in 0..=top_k {
        out.push_str(" --- |");
    }
    out.push('\n');
    for tech in model.technologies() {
        let neighbors = model
            .similarity
            .top_k(&tech.entity_id, Direction::TechToCompanies, top_k)
            .expect("technology id is on the matrix axis");
        let mut cells = vec![md_escape(&tech.name)];
        cells.extend(
            neighbors
                .neighbors
                .iter()
                .map(|(id, sim)| neighbor_cell(id, *sim)),
        );
        while cells.len() < top_k + 1 {
            cells.push(String::new());
        }
        table_row(&cells, &mut out);
    }
    out.push('\n');

    out.push_str("## Themed technologies and their closest company\n\n");
    let mut themed: BTreeMap<&str, Vec<&super::model::ModelEntity>> = BTreeMap::new();
    for tech in model.technologies() {
        if let Some(theme) = &tech.theme {
            themed.entry(theme.as_str()).or_default().push(tech);
        }
    }
    if themed.is_empty() {
        out.push_str("No themed technologies in the roster.\n\n");
    } else {
        for (theme, techs) in themed {
            out.push_str(&format!("### Theme: {}\n\n", md_escape(theme)));
            table_header(&["technology", "closest company", "similarity"], &mut out);
            for tech in techs {
                let nn = model
                    .similarity
                    .top_k(&tech.entity_id, Direction::TechToCompanies, 1)
                    .expect("technology id is on the matrix axis");
                let (company_id, sim) = &nn.neighbors[0];
                table_row(
                    &[
                        md_escape(&tech.name),
                        md_escape(&name_of(company_id)),
                        format_sig9(*sim),
                    ],
                    &mut out,
                );
            }
            out.push('\n');
        }
    }

    out.push_str("## Patent validation\n\n");
    match &model.validation {
        None => out.push_str("No patent data provided; validation skipped.\n"),
        Some(summary) => {
            out.push_str(&format!(
                "{} technologies tested: {} significant, {} not significant, {} degenerate.\n\n",
                summary.total, summary.significant, summary.not_significant, summary.degenerate
            ));
            table_header(
                &["technology", "n", "pearson r", "pearson p", "spearman rho", "spearman p", "significant", "degenerate"],
                &mut out,
            );
            for &i in &summary.order {
                let r = &model.correlations[i];
                table_row(
                    &[
                        md_escape(&name_of(&r.tech_id)),
                        r.n.to_string(),
                        opt_stat(r.pearson_r),
                        opt_stat(r.pearson_p),
                        opt_stat(r.spearman_rho),
                        opt_stat(r.spearman_p),
                        if r.significant { "yes" } else { "no" }.to_string(),
                        if r.degenerate { "yes" } else { "no" }.to_string(),
                    ],
                    &mut out,
                );
            }
        }
    }
    out.push('\n');
    out
}
