//! Export crawled pages as a technology roster CSV.

use std::io::Write;

use crate::crawl::{CategoryKind, CategoryPage};
use crate::HarvestError;

/// Write pages of kind `Page` as technology rows. Subcategories are
/// traversal structure, not technologies, and are skipped. The output loads
/// back through the roster loader unchanged.
pub fn export_roster<W: Write>(pages: &[CategoryPage], out: W) -> Result<(), HarvestError> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["tech_id", "name", "wiki_title", "theme"])
        .map_err(csv_io)?;
    let mut ordinal = 0usize;
    for page in pages {
        if page.kind != CategoryKind::Page {
            continue;
        }
        ordinal += 1;
        writer
            .write_record([
                &format!("t{ordinal:03}"),
                page.title.as_str(),
                page.title.as_str(),
                "",
            ])
            .map_err(csv_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> HarvestError {
    HarvestError::Io(std::io::Error::other(e))
}
