//! ESRI ASCII grid terrain.

use std::fs;
use std::path::Path;

use sparse_mpm_core::Heightfield;

use crate::error::{Error, Result};

fn parse_error(path: &Path, line: usize, message: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    }
}

/// Parses an ESRI ASCII grid. Rows run north to south; samples are placed at
/// cell centers. NODATA samples are rejected.
pub fn parse_heightfield(text: &str, path: &Path) -> Result<Heightfield> {
    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut centered = false;
    let mut cellsize = None;
    let mut nodata = None;
    let mut values = Vec::new();
    let mut data_line = 0;
    let mut rows_seen = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let first = line.split_whitespace().next().unwrap_or_default();
        if values.is_empty() && rows_seen == 0 && first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default().to_ascii_lowercase();
            let value = parts
                .next()
                .ok_or_else(|| parse_error(path, line_no, format!("header `{key}` has no value")))?;
            let num: f64 = value
                .parse()
                .map_err(|_| parse_error(path, line_no, format!("header `{key}` is not a number")))?;
            match key.as_str() {
                "ncols" => ncols = Some(num),
                "nrows" => nrows = Some(num),
                "xllcorner" => xll = Some(num),
                "yllcorner" => yll = Some(num),
                "xllcenter" => {
                    xll = Some(num);
                    centered = true;
                }
                "yllcenter" => yll = Some(num),
                "cellsize" => cellsize = Some(num),
                "nodata_value" => nodata = Some(num),
                _ => return Err(parse_error(path, line_no, format!("unknown header `{key}`"))),
            }
            continue;
        }
        let ncols = ncols.ok_or_else(|| parse_error(path, line_no, "missing ncols header"))? as usize;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_error(path, line_no, "non-numeric elevation"))?;
        if row.len() != ncols {
            return Err(parse_error(
                path,
                line_no,
                format!("row has {} values, expected {ncols}", row.len()),
            ));
        }
        if let Some(nd) = nodata {
            if row.contains(&nd) {
                return Err(parse_error(path, line_no, "NODATA samples are not supported"));
            }
        }
        values.push(row);
        rows_seen += 1;
        data_line = line_no;
    }

    let missing = |what: &str| parse_error(path, 1, format!("missing {what} header"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
    let (xll, yll) = (xll.ok_or_else(|| missing("xllcorner"))?, yll.ok_or_else(|| missing("yllcorner"))?);
    if ncols.fract() != 0.0 || nrows.fract() != 0.0 || ncols < 0.0 || nrows < 0.0 {
        return Err(parse_error(path, 1, "ncols and nrows must be whole numbers"));
    }
    let (nx, ny) = (ncols as usize, nrows as usize);
    if values.len() != ny {
        return Err(parse_error(path, data_line, format!("found {} rows, expected {ny}", values.len())));
    }
    let offset = if centered { 0.0 } else { 0.5 * cellsize };
    let mut elevation = vec![0.0; nx * ny];
    for (r, row) in values.iter().enumerate() {
        let j = ny - 1 - r;
        elevation[j * nx..(j + 1) * nx].copy_from_slice(row);
    }
    Heightfield::new([xll + offset, yll + offset], cellsize, nx, ny, elevation).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_heightfield(path: impl AsRef<Path>) -> Result<Heightfield> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_heightfield(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Heightfield> {
        parse_heightfield(text, Path::new("t.asc"))
    }

    #[test]
    fn rows_run_north_to_south() {
        let f = parse("ncols 3\nnrows 2\nxllcorner 10\nyllcorner 20\ncellsize 2\nNODATA_value -9999\n4 5 6\n1 2 3\n")
            .unwrap();
        assert_eq!((f.nx, f.ny), (3, 2));
        assert_eq!(f.origin, [11.0, 21.0]);
        assert_eq!(f.elevation, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(f.height(11.0, 21.0), 1.0);
        assert_eq!(f.height(15.0, 23.0), 6.0);
    }

    #[test]
    fn center_registration() {
        let f = parse("ncols 2\nnrows 2\nxllcenter 0\nyllcenter 0\ncellsize 1\n0 0\n0 0\n").unwrap();
        assert_eq!(f.origin, [0.0, 0.0]);
    }

    #[test]
    fn malformed_inputs() {
        let cases = [
            ("ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n1 2\n", "line 7"),
            ("ncols 2\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n1 2\n", "expected 3"),
            ("ncols 2\nnrows 2\nxllcorner 0\ncellsize 1\n1 2\n1 2\n", "yllcorner"),
            ("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -1\n1 -1\n1 2\n", "NODATA"),
            ("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize x\n", "cellsize"),
        ];
        for (text, needle) in cases {
            let err = parse(text).unwrap_err();
            assert!(err.is_config());
            assert!(err.to_string().contains(needle), "{err}");
        }
    }
}
