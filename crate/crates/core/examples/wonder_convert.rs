//! Converts a CDC WONDER "Export Results" file into the canonical TSV the
//! `od-assim` binary reads.
//!
//! ```text
//! cargo run --example wonder_convert -- population  export.txt population.tsv
//! cargo run --example wonder_convert -- fatalities  export.txt fatalities.tsv
//! cargo run --example wonder_convert -- counties    export.txt counties.tsv
//! ```

use std::path::Path;

use od_assim::ingest::wonder::*;
use od_assim::ingest::{serialize_county, serialize_fatalities, serialize_population};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [kind, input, output] = args.as_slice() else {
        return Err("usage: wonder_convert <population|fatalities|counties> <export> <output>".into());
    };
    let text = read_export(Path::new(input))?;
    let canonical = match kind.as_str() {
        "population" => serialize_population(&population_from_export(&text, input)?),
        "fatalities" => serialize_fatalities(&fatalities_from_export(&text, input)?),
        "counties" => {
            let table = counties_from_export(&text, input)?;
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            serialize_county(&table)
        }
        other => return Err(format!("unknown kind `{other}`").into()),
    };
    std::fs::write(output, &canonical)?;
    println!("{output}: {} data rows", canonical.lines().count().saturating_sub(1));
    Ok(())
}
