//! Function specs accepted by `--function`:
//!
//! * `family:p` – `ρ_p|x| − 1` for odd `p ≥ 3`
//! * `tent` – `2|x| − 1`
//! * `slope:s` – `s|x| − 1`, `0 ≤ s ≤ 2`
//! * `file:path.json` – a saved `{domain, knots}` function

use std::fs::File;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use chaos_sep::pl::{read_json, PLFunction, SELF_MAP_EPS};
use chaos_sep::separation::{hard_family, slope_map, tent_map};

pub fn parse(spec: &str) -> Result<PLFunction> {
    let (kind, arg) = match spec.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (spec, None),
    };
    let f = match (kind, arg) {
        ("tent", None) => tent_map(),
        ("family", Some(p)) => {
            let p: usize = p.parse().with_context(|| format!("bad period `{p}`"))?;
            hard_family(p)?
        }
        ("slope", Some(s)) => {
            let s: f64 = s.parse().with_context(|| format!("bad slope `{s}`"))?;
            slope_map(s)?
        }
        ("file", Some(path)) => load(Path::new(path))?,
        _ => bail!("unknown function spec `{spec}` (expected family:p, tent, slope:s or file:path.json)"),
    };
    Ok(f)
}

fn load(path: &Path) -> Result<PLFunction> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let f = read_json(file).map_err(|e| anyhow!("cannot read {}: {e}", path.display()))?;
    f.check_self_map(SELF_MAP_EPS)
        .map_err(|e| anyhow!("{} is not a self-map: {e}", path.display()))?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_builtins() {
        assert_eq!(parse("tent").unwrap().lipschitz(), 2.0);
        assert!((parse("slope:1.2").unwrap().lipschitz() - 1.2).abs() < 1e-15);
        assert!((parse("family:3").unwrap().lipschitz() - 1.618033988749895).abs() < 1e-12);
        for bad in ["family:4", "family:x", "slope:3", "tent:1", "cube", "file:/nonexistent.json"] {
            assert!(parse(bad).is_err(), "{bad}");
        }
    }
}
