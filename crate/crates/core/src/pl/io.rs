//! CSV (`x,y`) and JSON (`{domain, knots}`) forms of a [`PLFunction`].
//!
//! Doubles are written with Rust's shortest round-trip formatting, so reading
//! back reproduces every knot bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{PLFunction, PlError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlJson {
    pub domain: [f64; 2],
    pub knots: Vec<[f64; 2]>,
}

impl From<&PLFunction> for PlJson {
    fn from(f: &PLFunction) -> Self {
        let (lo, hi) = f.domain();
        PlJson {
            domain: [lo, hi],
            knots: f.knots().map(|(x, y)| [x, y]).collect(),
        }
    }
}

impl TryFrom<PlJson> for PLFunction {
    type Error = PlError;

    fn try_from(j: PlJson) -> Result<Self> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = j.knots.iter().map(|k| (k[0], k[1])).unzip();
        let f = PLFunction::from_parts(xs, ys)?;
        if f.domain() != (j.domain[0], j.domain[1]) {
            return Err(PlError::Format(format!(
                "domain {:?} does not match first/last knot {:?}",
                j.domain,
                f.domain()
            )));
        }
        Ok(f)
    }
}

pub fn write_json<W: Write>(f: &PLFunction, w: W) -> Result<()> {
    serde_json::to_writer(w, &PlJson::from(f))?;
    Ok(())
}

pub fn read_json<R: Read>(r: R) -> Result<PLFunction> {
    let j: PlJson = serde_json::from_reader(r)?;
    PLFunction::try_from(j)
}

pub fn write_csv<W: Write>(f: &PLFunction, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["x", "y"])?;
    for (x, y) in f.knots() {
        wtr.write_record([x.to_string(), y.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<PLFunction> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(PlError::Format(format!(
            "expected header `x,y`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| PlError::Format(format!("row {}: {e}", row + 1)))
        };
        xs.push(parse(&rec[0])?);
        ys.push(parse(&rec[1])?);
    }
    PLFunction::from_parts(xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_pl() -> impl Strategy<Value = PLFunction> {
        (2usize..20).prop_flat_map(|n| {
            (
                proptest::collection::vec(-1e6f64..1e6, n),
                proptest::collection::vec(1e-9f64..10.0, n - 1),
                -1e3f64..1e3,
            )
                .prop_map(|(ys, gaps, x0)| {
                    let mut xs = vec![x0];
                    for g in gaps {
                        let next = xs[xs.len() - 1] + g;
                        xs.push(next);
                    }
                    PLFunction::from_parts(xs, ys).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bitwise(f in arb_pl()) {
            let mut buf = Vec::new();
            write_csv(&f, &mut buf).unwrap();
            let g = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(f, g);
        }

        #[test]
        fn json_round_trip_is_bitwise(f in arb_pl()) {
            let mut buf = Vec::new();
            write_json(&f, &mut buf).unwrap();
            let g = read_json(buf.as_slice()).unwrap();
            prop_assert_eq!(f, g);
        }
    }

    #[test]
    fn rejects_wrong_header_and_domain() {
        assert!(read_csv("a,b\n0,0\n1,1\n".as_bytes()).is_err());
        let bad = r#"{"domain":[0,2],"knots":[[0,0],[1,1]]}"#;
        assert!(matches!(read_json(bad.as_bytes()), Err(PlError::Format(_))));
    }
}
