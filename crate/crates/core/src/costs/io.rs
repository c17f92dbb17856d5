//! Text persistence for learned costs.
//!
//! Both formats are CSV with `# key=value` header lines. Floats are written
//! in shortest round-trip form so a write/read cycle is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{RoutingCostField, SeparationCost};
use crate::error::{Error, Result};
use crate::lattice::{GridState, Resolution};

const FIELD_MAGIC: &str = "atc-ioc routing cost field v1";
const SEPARATION_MAGIC: &str = "atc-ioc separation cost v1";

fn split_header(text: &str) -> (BTreeMap<String, String>, Vec<&str>, &str) {
    let mut meta = BTreeMap::new();
    let mut comments = Vec::new();
    let mut rest = text;
    while let Some(line) = rest.lines().next() {
        let Some(body) = line.strip_prefix('#') else { break };
        let body = body.trim();
        match body.split_once('=') {
            Some((k, v)) if !k.contains(' ') => {
                meta.insert(k.trim().to_owned(), v.trim().to_owned());
            }
            _ => comments.push(body),
        }
        rest = rest[line.len()..].trim_start_matches(['\r', '\n']);
    }
    (meta, comments, rest)
}

fn meta_f64(meta: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<f64> {
    let raw = meta
        .get(key)
        .ok_or_else(|| Error::format(path, format!("missing header key `{key}`")))?;
    raw.parse()
        .map_err(|_| Error::format(path, format!("header `{key}` is not a number: {raw}")))
}

fn write_file(path: &Path, body: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body).map_err(|e| Error::io(path, e))
}

/// Writes the field as `i,j,k,l,w` records in lexicographic cell order.
pub fn write_field(field: &RoutingCostField, path: &Path) -> Result<()> {
    let r = field.resolution();
    let mut out = format!(
        "# {FIELD_MAGIC}\n\
         # units: i,j,k,l are coarse cell indices; w is dimensionless\n\
         # resolution_x_m={}\n# resolution_y_m={}\n# resolution_z_m={}\n# resolution_phi_rad={}\n\
         # default_weight={}\n",
        r.x,
        r.y,
        r.z,
        r.phi,
        field.default_weight()
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["i", "j", "k", "l", "w"])?;
    for (c, weight) in field.sorted_cells() {
        w.write_record([
            c.i.to_string(),
            c.j.to_string(),
            c.k.to_string(),
            c.l.to_string(),
            weight.to_string(),
        ])?;
    }
    let body = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    write_file(path, out.as_bytes())
}

pub fn read_field(path: &Path) -> Result<RoutingCostField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (meta, comments, body) = split_header(&text);
    if comments.first() != Some(&FIELD_MAGIC) {
        return Err(Error::format(path, "not a routing cost field file"));
    }
    let res = Resolution::new(
        meta_f64(&meta, "resolution_x_m", path)?,
        meta_f64(&meta, "resolution_y_m", path)?,
        meta_f64(&meta, "resolution_z_m", path)?,
        meta_f64(&meta, "resolution_phi_rad", path)?,
    );
    res.validate().map_err(|e| Error::format(path, e.to_string()))?;
    let default = meta_f64(&meta, "default_weight", path)?;
    let mut field = RoutingCostField::new(res, default);
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    for rec in rdr.deserialize() {
        let (i, j, k, l, w): (i32, i32, i32, i32, f64) = rec?;
        if !w.is_finite() {
            return Err(Error::format(path, format!("non-finite weight at ({i},{j},{k},{l})")));
        }
        field.set(GridState::new(i, j, k, l), w);
    }
    Ok(field)
}

pub fn write_separation(sep: &SeparationCost, path: &Path) -> Result<()> {
    let body = format!(
        "# {SEPARATION_MAGIC}\n\
         # units: u is dimensionless; v_xy and v_z are fine-grid cells\n\
         u,v_xy,v_z\n{},{},{}\n",
        sep.u, sep.v_xy, sep.v_z
    );
    write_file(path, body.as_bytes())
}

pub fn read_separation(path: &Path) -> Result<SeparationCost> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (_, comments, body) = split_header(&text);
    if comments.first() != Some(&SEPARATION_MAGIC) {
        return Err(Error::format(path, "not a separation cost file"));
    }
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let sep: SeparationCost = rdr
        .deserialize()
        .next()
        .ok_or_else(|| Error::format(path, "missing parameter record"))??;
    if !(sep.u.is_finite() && sep.v_xy >= 0.0 && sep.v_z >= 0.0) {
        return Err(Error::format(path, format!("invalid separation parameters {sep:?}")));
    }
    Ok(sep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        let mut f = RoutingCostField::default();
        f.set(GridState::new(3, -2, 1, 0), 0.1 + 0.2);
        f.set(GridState::new(-7, 4, 9, -3), -1e-300);
        f.set(GridState::new(0, 0, 0, 0), 123.456_789_012_345_68);
        write_field(&f, &path).unwrap();
        let g = read_field(&path).unwrap();
        assert_eq!(f, g);

        let text = fs::read_to_string(&path).unwrap();
        let rows: Vec<_> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert!(rows[0].starts_with("-7,"));
    }

    #[test]
    fn separation_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sep.csv");
        let s = SeparationCost::new(1.0, 59.4, 41.000_000_000_000_01);
        write_separation(&s, &path).unwrap();
        assert_eq!(read_separation(&path).unwrap(), s);
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_field(&path).is_err());
        assert!(read_separation(&path).is_err());
    }
}
