//! Space descriptions, matrix and vector CSV files, and witness files.
//!
//! A basis is stored as JSON `{"space": {...}, "synth": "file.csv"}`. The
//! space description is recursive (DKK spaces carry their own base basis).
//! Matrices are written column by column: line `j` of the CSV holds column
//! `j`. Without `synth` the basis is the unit vector system; a `diagonal`
//! array describes `x_n = d_n e_n`; an optional `anal` file supplies the dual
//! functionals, which are otherwise obtained by inversion.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{affinity, Basis, Coords, DirectSumSpace, NormedSpace, SpanSpace};
use crate::constructions::DkkSpace;
use crate::error::{check_dim, Error, Result};
use crate::estimators::{EstimateReport, Provenance, Witness, WitnessFamily};
use crate::partition::OrderedPartition;
use crate::seqspace::SeqNorm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpaceDesc {
    Seq {
        norm: SeqNorm,
    },
    Dkk {
        host: SeqNorm,
        partition: OrderedPartition,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        multiplicity: Option<Vec<f64>>,
        base: Box<BasisDesc>,
    },
    Sum {
        left: Box<SpaceDesc>,
        right: Box<SpaceDesc>,
    },
    Span {
        ambient: Box<SpaceDesc>,
        generators: Vec<Vec<(usize, f64)>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDesc {
    pub space: SpaceDesc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<Vec<f64>>,
}

fn sibling(json: &Path, suffix: &str) -> PathBuf {
    let stem = json
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "space".into());
    json.with_file_name(format!("{stem}.{suffix}"))
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

struct Writer<'a> {
    json: &'a Path,
}

impl Writer<'_> {
    fn space(&self, s: &NormedSpace, prefix: &str) -> Result<SpaceDesc> {
        Ok(match s {
            NormedSpace::Seq(n) => SpaceDesc::Seq { norm: n.clone() },
            NormedSpace::Dkk(d) => SpaceDesc::Dkk {
                host: d.host().clone(),
                partition: d.partition().clone(),
                multiplicity: d.multiplicity().map(<[f64]>::to_vec),
                base: Box::new(self.basis(d.base(), &format!("{prefix}base."))?),
            },
            NormedSpace::Sum(s) => SpaceDesc::Sum {
                left: Box::new(self.space(&s.left, &format!("{prefix}left."))?),
                right: Box::new(self.space(&s.right, &format!("{prefix}right."))?),
            },
            NormedSpace::Span(s) => SpaceDesc::Span {
                ambient: Box::new(self.space(&s.ambient, &format!("{prefix}ambient."))?),
                generators: s.generators().to_vec(),
            },
        })
    }

    fn basis(&self, b: &Basis, prefix: &str) -> Result<BasisDesc> {
        let space = self.space(b.space(), prefix)?;
        let mut desc = BasisDesc {
            space,
            synth: None,
            anal: None,
            diagonal: None,
        };
        match b.coords() {
            Coords::Identity => {}
            Coords::Diagonal(d) => desc.diagonal = Some(d.clone()),
            Coords::Dense { synth, anal } => {
                let sp = sibling(self.json, &format!("{prefix}synth.csv"));
                let ap = sibling(self.json, &format!("{prefix}anal.csv"));
                write_matrix_csv(&sp, synth)?;
                write_matrix_csv(&ap, anal)?;
                desc.synth = Some(file_name(&sp));
                desc.anal = Some(file_name(&ap));
            }
        }
        Ok(desc)
    }
}

/// Writes `b` to `path` plus matrix files next to it.
pub fn save_basis(b: &Basis, path: &Path) -> Result<()> {
    let desc = Writer { json: path }.basis(b, "")?;
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, &desc)?;
    Ok(())
}

fn build_space(desc: &SpaceDesc, dir: &Path) -> Result<NormedSpace> {
    Ok(match desc {
        SpaceDesc::Seq { norm } => NormedSpace::Seq(norm.clone()),
        SpaceDesc::Dkk {
            host,
            partition,
            multiplicity,
            base,
        } => {
            let base = build_basis(base, dir)?;
            let d = match multiplicity {
                Some(m) => DkkSpace::with_multiplicity(base, host.clone(), partition.clone(), m.clone())?,
                None => DkkSpace::new(base, host.clone(), partition.clone())?,
            };
            NormedSpace::Dkk(Arc::new(d))
        }
        SpaceDesc::Sum { left, right } => NormedSpace::Sum(DirectSumSpace::new(
            Arc::new(build_space(left, dir)?),
            Arc::new(build_space(right, dir)?),
        )),
        SpaceDesc::Span { ambient, generators } => NormedSpace::Span(SpanSpace::new(
            Arc::new(build_space(ambient, dir)?),
            generators.clone(),
        )?),
    })
}

/// Builds a basis from a description; relative file names resolve against `dir`.
pub fn build_basis(desc: &BasisDesc, dir: &Path) -> Result<Basis> {
    let space = Arc::new(build_space(&desc.space, dir)?);
    let n = space.dim();
    match (&desc.synth, &desc.diagonal) {
        (Some(_), Some(_)) => Err(Error::InvalidParameter(
            "a basis has either a synth matrix or a diagonal".into(),
        )),
        (None, None) => {
            if desc.anal.is_some() {
                return Err(Error::InvalidParameter("anal given without synth".into()));
            }
            Ok(Basis::unit(space))
        }
        (None, Some(d)) => {
            check_dim(n, d.len())?;
            affinity(&Basis::unit(space), d)
        }
        (Some(s), None) => {
            let synth = read_matrix_csv(&dir.join(s), n)?;
            match &desc.anal {
                Some(a) => Basis::from_pair(space, synth, read_matrix_csv(&dir.join(a), n)?),
                None => Basis::from_synth(space, synth),
            }
        }
    }
}

pub fn load_basis(path: &Path) -> Result<Basis> {
    let desc: BasisDesc = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    build_basis(&desc, dir)
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for col in m.column_iter() {
        let line: Vec<String> = col.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an `n × n` matrix written column by column.
pub fn read_matrix_csv(path: &Path, n: usize) -> Result<DMatrix<f64>> {
    let mut data = Vec::with_capacity(n * n);
    let mut cols = 0;
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_floats(&line)?;
        check_dim(n, row.len())?;
        data.extend(row);
        cols += 1;
    }
    check_dim(n, cols)?;
    Ok(DMatrix::from_column_slice(n, n, &data))
}

fn parse_floats(line: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number {:?}", t.trim())))
        })
        .collect()
}

/// Single-column CSV, one entry per line.
pub fn write_vector_csv(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for x in v {
        writeln!(w, "{x}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() {
            out.extend(parse_floats(t)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct WitnessRow {
    witness: String,
    provenance: String,
    index: usize,
    coeff: f64,
    in_set: u8,
}

fn provenance_name(p: Provenance) -> &'static str {
    match p {
        Provenance::Construction => "construction",
        Provenance::Random => "random",
        Provenance::Structured => "structured",
    }
}

/// Long format: one row per index that carries a nonzero coefficient or
/// belongs to the set.
pub fn write_witnesses_csv(path: &Path, family: &WitnessFamily) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for wit in family.iter() {
        let mut in_set = vec![false; wit.coeffs.len()];
        for &i in &wit.set {
            in_set[i] = true;
        }
        for (i, &c) in wit.coeffs.iter().enumerate() {
            if c != 0.0 || in_set[i] {
                w.serialize(WitnessRow {
                    witness: wit.label.clone(),
                    provenance: provenance_name(wit.provenance).into(),
                    index: i,
                    coeff: c,
                    in_set: in_set[i] as u8,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_witnesses_csv(path: &Path, dim: usize) -> Result<WitnessFamily> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out: Vec<Witness> = Vec::new();
    for row in r.deserialize() {
        let row: WitnessRow = row?;
        if row.index >= dim {
            return Err(Error::IndexOutOfRange { index: row.index, len: dim });
        }
        if out.last().map(|w| w.label != row.witness).unwrap_or(true) {
            let provenance = match row.provenance.as_str() {
                "construction" => Provenance::Construction,
                "random" => Provenance::Random,
                "structured" => Provenance::Structured,
                other => return Err(Error::InvalidParameter(format!("unknown provenance {other:?}"))),
            };
            out.push(Witness {
                label: row.witness.clone(),
                provenance,
                coeffs: vec![0.0; dim],
                set: Vec::new(),
            });
        }
        let w = out.last_mut().expect("pushed above");
        w.coeffs[row.index] = row.coeff;
        if row.in_set != 0 {
            w.set.push(row.index);
        }
    }
    for w in &mut out {
        w.set.sort_unstable();
    }
    Ok(WitnessFamily::new(out))
}

/// Long-format report CSV with columns `quantity,scale,value,bound_kind,witness,seed`.
pub fn write_report_csv<W: Write>(out: W, rows: &[EstimateReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["quantity", "scale", "value", "bound_kind", "witness", "seed"])?;
    for r in rows {
        w.write_record([
            r.quantity.clone(),
            r.scale.to_string(),
            r.value.to_string(),
            r.bound_kind.to_string(),
            r.witness.clone(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{build_main_a, build_thm_a, DEFAULT_DIM_CAP};
    use crate::estimators::BoundKind;
    use crate::sampling;

    #[test]
    fn matrix_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = sampling::stream(1, 0);
        let m = DMatrix::from_column_slice(4, 4, &sampling::gaussian_vector(16, &mut rng));
        let p = dir.path().join("m.csv");
        write_matrix_csv(&p, &m).unwrap();
        assert_eq!(read_matrix_csv(&p, 4).unwrap(), m);
        let first = std::fs::read_to_string(&p).unwrap();
        let want: Vec<String> = m.column(0).iter().map(|x| x.to_string()).collect();
        assert_eq!(first.lines().next().unwrap(), want.join(","));
        assert!(read_matrix_csv(&p, 3).is_err());
    }

    #[test]
    fn vector_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.csv");
        let v = vec![1.5, -0.1, 3e-300, 0.0];
        write_vector_csv(&p, &v).unwrap();
        assert_eq!(read_vector_csv(&p).unwrap(), v);
    }

    #[test]
    fn thm_a_space_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let thm = build_thm_a(&SeqNorm::l2(1), None, 3, DEFAULT_DIM_CAP).unwrap();
        let p = dir.path().join("thm.json");
        save_basis(thm.basis(), &p).unwrap();
        let back = load_basis(&p).unwrap();
        assert_eq!(back.dim(), thm.basis().dim());
        let mut rng = sampling::stream(2, 0);
        for k in 0..20 {
            let c = sampling::probe_vector(back.dim(), k, &mut rng);
            let (a, b) = (thm.basis().cnorm(&c), back.cnorm(&c));
            assert!((a - b).abs() <= 1e-14 * a.max(1.0));
        }
        let text = std::fs::read_to_string(&p).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["space"]["type"], "dkk");
        assert_eq!(v["space"]["partition"]["sizes"][0], 2);
        assert_eq!(v["space"]["base"]["synth"], "thm.base.synth.csv");
    }

    #[test]
    fn compressed_space_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = build_main_a(&SeqNorm::l2(1), 2, DEFAULT_DIM_CAP).unwrap();
        let p = dir.path().join("a.json");
        save_basis(&a.basis, &p).unwrap();
        let back = load_basis(&p).unwrap();
        let w = &a.witnesses[1];
        let f: Vec<f64> = w.g.iter().zip(&w.f).map(|(g, f)| g - f).collect();
        assert!((back.cnorm(&f) - a.basis.cnorm(&f)).abs() < 1e-12);
    }

    #[test]
    fn witnesses_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.csv");
        let fam = WitnessFamily::new(vec![
            Witness::structured("a", vec![0.0, 2.0, 0.0, -1.0], vec![0, 1]),
            Witness {
                label: "b".into(),
                provenance: Provenance::Construction,
                coeffs: vec![1.0, 0.0, 0.0, 0.0],
                set: vec![],
            },
        ]);
        write_witnesses_csv(&p, &fam).unwrap();
        assert_eq!(read_witnesses_csv(&p, 4).unwrap(), fam);
        assert!(read_witnesses_csv(&p, 2).is_err());
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "quantity,scale,value,bound_kind,witness,seed\n");
        let mut buf = Vec::new();
        let row = EstimateReport::new("km", 2.0, 1.5, BoundKind::Lower, "x", 7);
        write_report_csv(&mut buf, &[row]).unwrap();
        assert!(String::from_utf8(buf).unwrap().ends_with("km,2,1.5,lower,x,7\n"));
    }
}
