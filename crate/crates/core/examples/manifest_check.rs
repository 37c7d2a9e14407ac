//! Parses a manifest and reports gaps in the column series.
use std::path::Path;

use scribeshift::corpus::{parse_manifest, validate_series};

const MANIFEST: &str = "\
scan_id,column_index,split_side,image_path
# column 3 was never photographed
c01,1,whole,scans/c01.png
c02,2,whole,scans/c02.png
c04a,4,a,scans/c04a.png
c04b,4,b,scans/c04b.png
c05,5,whole,scans/c05.png
";

fn main() -> scribeshift::Result<()> {
    let records = parse_manifest(MANIFEST, Path::new("/data"))?;
    for r in &records {
        println!(
            "{:>3} {:<5} {}",
            r.column_index,
            r.split_side.as_str(),
            r.image_path.display()
        );
    }
    let layout = validate_series(&records);
    println!("{}", serde_json::to_string_pretty(&layout).unwrap());

    let bad = "scan_id,column_index,split_side,image_path\nx,0,whole,a.png\n";
    match parse_manifest(bad, Path::new(".")) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
