//! CSV loaders for user-specified tables.
//!
//! Files carry one header row followed by integer index columns and a final
//! value column: `(i, j, value)` for kernels, `(i, j, k, value)` for daughter
//! distributions and `(i, j, s, value)` for breakup tables. Lines starting
//! with `#` are ignored.

use std::io::Read;
use std::path::Path;

use super::{BreakupTable, DaughterTable, KernelError, KernelTable};

fn parse_rows<R: Read, const N: usize>(reader: R) -> Result<Vec<([usize; N], f64)>, KernelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows = Vec::new();
    for (n, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| KernelError::Table(e.to_string()))?;
        let line = record.position().map_or(n + 2, |p| p.line() as usize);
        if record.len() != N + 1 {
            return Err(KernelError::Table(format!(
                "line {line}: expected {} columns, found {}",
                N + 1,
                record.len()
            )));
        }
        let mut idx = [0usize; N];
        for (slot, field) in idx.iter_mut().zip(record.iter()) {
            *slot = field
                .parse()
                .map_err(|_| KernelError::Table(format!("line {line}: bad index {field:?}")))?;
        }
        let value: f64 = record[N]
            .parse()
            .map_err(|_| KernelError::Table(format!("line {line}: bad value {:?}", &record[N])))?;
        rows.push((idx, value));
    }
    Ok(rows)
}

fn open(path: &Path) -> Result<std::fs::File, KernelError> {
    std::fs::File::open(path).map_err(|e| KernelError::Table(format!("{}: {e}", path.display())))
}

/// Kernel table from `(i, j, value)` rows. `l_max` defaults to the largest
/// index present.
pub fn read_kernel<R: Read>(reader: R, l_max: Option<usize>) -> Result<KernelTable, KernelError> {
    let rows = parse_rows::<_, 2>(reader)?;
    let l = l_max.unwrap_or_else(|| rows.iter().map(|(ix, _)| ix[0].max(ix[1])).max().unwrap_or(0));
    KernelTable::from_entries(l, rows.into_iter().map(|([i, j], v)| (i, j, v)))
}

/// Daughter table from `(i, j, k, value)` rows.
pub fn read_daughter<R: Read>(
    reader: R,
    j_max: Option<usize>,
    k_max: Option<usize>,
) -> Result<DaughterTable, KernelError> {
    let rows = parse_rows::<_, 3>(reader)?;
    let jm = j_max.unwrap_or_else(|| rows.iter().map(|(ix, _)| ix[1]).max().unwrap_or(0));
    let km = k_max.unwrap_or_else(|| rows.iter().map(|(ix, _)| ix[2]).max().unwrap_or(0));
    DaughterTable::from_entries(jm, km, rows.into_iter().map(|([i, j, k], v)| (i, j, k, v)))
}

/// Breakup table from `(i, j, s, value)` rows.
pub fn read_breakup<R: Read>(reader: R, l_max: Option<usize>) -> Result<BreakupTable, KernelError> {
    let rows = parse_rows::<_, 3>(reader)?;
    let l = l_max.unwrap_or_else(|| rows.iter().map(|(ix, _)| ix[0].max(ix[1])).max().unwrap_or(0));
    BreakupTable::from_entries(l, rows.into_iter().map(|([i, j, s], v)| (i, j, s, v)))
}

pub fn load_kernel(path: &Path, l_max: Option<usize>) -> Result<KernelTable, KernelError> {
    read_kernel(open(path)?, l_max)
}

pub fn load_daughter(path: &Path, j_max: Option<usize>, k_max: Option<usize>) -> Result<DaughterTable, KernelError> {
    read_daughter(open(path)?, j_max, k_max)
}

pub fn load_breakup(path: &Path, l_max: Option<usize>) -> Result<BreakupTable, KernelError> {
    read_breakup(open(path)?, l_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{validate_breakup, CollisionKernel, ViolationKind};

    #[test]
    fn reads_kernel_rows() {
        let csv = "i,j,value\n# comment\n1,1,1.0\n2,3,5\n3,2,4\n";
        let t = read_kernel(csv.as_bytes(), None).unwrap();
        assert_eq!(t.l_max(), 3);
        let k = CollisionKernel::from_table(t);
        assert_eq!(k.eval(2, 3), Ok(5.0));
        assert_eq!(k.eval(3, 2), Ok(4.0));
        assert_eq!(k.eval(2, 2), Ok(0.0));
    }

    #[test]
    fn reads_breakup_rows() {
        let csv = "i,j,s,value\n2,2,3,1\n2,2,1,1\n";
        let t = read_breakup(csv.as_bytes(), Some(4)).unwrap();
        let report = validate_breakup(&t, 2);
        // (1,1), (1,2), (2,1) rows are empty in this file.
        assert!(report.has(ViolationKind::MassBalance));
        assert!(!report.violations().iter().any(|v| v.at == vec![2, 2]));
    }

    #[test]
    fn bad_rows_report_the_line() {
        let csv = "i,j,value\n1,1,1.0\n2,x,1.0\n";
        let err = read_kernel(csv.as_bytes(), None).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let short = "i,j,k,value\n1,2,1\n";
        assert!(read_daughter(short.as_bytes(), None, None).is_err());
    }
}
