//! Executable checks of the game's theory: exact enumeration on scalar
//! quadratic games and sampled equilibrium/invariance certificates for
//! trained ensembles.

mod certify;
mod quad;

pub use certify::{
    verify_invariance, verify_nash, DeviationReport, EnvDeviation, MIN_BUDGET, PERTURB_SCALES,
};
pub use quad::{bounded_linear_ne, scalar_game_grid, BoundedNe, GridResult, QuadGameSpec, QuadRisk};

use std::io::Write;

use crate::error::Result;

/// `key=value` lines.
pub fn write_key_values<W: Write>(pairs: &[(String, String)], w: &mut W) -> Result<()> {
    for (k, v) in pairs {
        writeln!(w, "{k}={v}")?;
    }
    Ok(())
}

/// Aligned human-readable block with a title line.
pub fn format_report(title: &str, pairs: &[(String, String)]) -> String {
    let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = format!("== {title} ==\n");
    for (k, v) in pairs {
        out.push_str(&format!("  {k:<width$}  {v}\n"));
    }
    out
}
