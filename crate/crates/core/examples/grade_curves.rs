//! Category response curves as CSV, ready for any plotting tool.
//!
//! cargo run --example grade_curves > curves.csv

use agrm::cli::curves_csv;
use agrm::grm::AgrmParams;

fn main() -> agrm::Result<()> {
    let base = AgrmParams::with_defaults(0.0, -1.5, 1.0)?;
    print!("{}", curves_csv(&base, -5.0, 5.0, 201)?);
    Ok(())
}
