//! Model assembly and serialization: canonical JSON export, SVG landscape
//! map, and the CommonMark report.

mod model;
mod report;
mod svg;

pub use model::{
    canonicalize_value, export_model_json, recanonicalize, AlignmentInfo, FileRef, Json,
    LandscapeModel, ModelEntity, ModelMetadata, UnresolvedEntity,
};
pub use report::report_markdown;
pub use svg::{render_svg, SvgOptions, PALETTE};
