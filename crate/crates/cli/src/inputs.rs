use std::fs;
use std::path::Path;

use plurvec::pipeline::Provenance;
use plurvec::shifts::{read_pairs_tsv, PairSet};
use plurvec::EmbeddingTable;

use crate::{Failure, PairArgs, TableArgs};

pub fn load_table(args: &TableArgs) -> Result<EmbeddingTable, Failure> {
    let t = EmbeddingTable::load(&args.embeddings, args.dim)?;
    Ok(if args.normalize { t.normalized() } else { t })
}

pub fn load_pairs(table: &EmbeddingTable, args: &PairArgs) -> Result<PairSet, Failure> {
    let records = read_pairs_tsv(&args.pairs)?;
    let (pairs, missing) = PairSet::resolve(table, &records, args.pairs.display().to_string())?;
    if !missing.is_empty() {
        let shown: Vec<String> = missing.iter().take(5).flat_map(|u| u.missing.clone()).collect();
        if !args.skip_missing {
            return Err(Failure::Data(format!(
                "{} pair(s) have words missing from the embeddings (e.g. {}); pass --skip-missing to drop them",
                missing.len(),
                shown.join(", ")
            )));
        }
        eprintln!("dropped {} pair(s) with missing words", missing.len());
    }
    Ok(pairs)
}

pub fn table_and_pairs(args: &PairArgs) -> Result<(EmbeddingTable, PairSet), Failure> {
    let table = load_table(&args.table)?;
    let pairs = load_pairs(&table, args)?;
    Ok((table, pairs))
}

pub fn with_table(p: Provenance, args: &TableArgs) -> Result<Provenance, Failure> {
    Ok(p.with_file("embeddings", &args.embeddings)?)
}

pub fn with_pairs(p: Provenance, args: &PairArgs) -> Result<Provenance, Failure> {
    Ok(with_table(p, &args.table)?.with_file("pairs", &args.pairs)?)
}

/// Numeric rows of a whitespace-, comma- or tab-separated file. Blank lines,
/// `#` comments and a non-numeric first line (a header) are skipped.
pub fn read_numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    let mut first = true;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c == '\t' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if first => {}
            Err(_) => return Err(Failure::Data(format!("{}:{}: non-numeric field", path.display(), n + 1))),
        }
        first = false;
    }
    if rows.is_empty() {
        return Err(Failure::Usage(format!("{}: no numeric rows", path.display())));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(Failure::Data(format!("{}: rows differ in column count", path.display())));
    }
    Ok(rows)
}

pub fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

pub fn json_string(v: &impl serde::Serialize) -> Result<String, Failure> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Data(e.to_string()))
}
