//! On-disk formats.
//!
//! Matrices are CSV, one row per line, every value written with 17
//! significant digits (`{:.16e}`) so that reading back is exact. An optional
//! first line holds column names `c0, c1, …`.
//!
//! A chain file starts with one line of JSON ([`ChainHeader`]) followed by
//! the draws. With the binary encoding each draw is `p·r` little-endian
//! `f64` values of `B` in row-major order, one `f64` for `σ²`, then `p`
//! bytes of `ξ` (0 or 1). With the CSV encoding each draw is one CSV line
//! holding the same fields in the same order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::prior::MsslHyper;
use crate::sampler::{Draw, McmcConfig};
use crate::synth::SpikedCovModel;

fn parse_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix_csv(path: &Path, m: &Mat, header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    if header {
        w.write_record((0..m.ncols()).map(|k| format!("c{k}")))?;
    }
    for row in m.row_iter() {
        w.write_record(row.iter().map(|&v| format_value(v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path, header: bool) -> Result<Mat> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut data = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        match ncols {
            None => ncols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(parse_err(
                    path,
                    format!("row {i} has {} fields, expected {c}", rec.len()),
                ));
            }
            _ => {}
        }
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(path, format!("row {i}: cannot parse {field:?} as a number"))
            })?;
            data.push(v);
        }
        nrows += 1;
    }
    let ncols = ncols.unwrap_or(0);
    Ok(Mat::from_row_slice(nrows, ncols, &data))
}

pub fn write_vector_csv(path: &Path, name: &str, v: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", name])?;
    for (j, x) in v.iter().enumerate() {
        w.write_record([j.to_string(), format_value(*x)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))
}

/// JSON form of a [`SpikedCovModel`]: only the nonzero block of `U₀` is stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub p: usize,
    pub r: usize,
    pub s: usize,
    pub support: Vec<usize>,
    pub lambda0: Vec<f64>,
    pub sigma0_sq: f64,
    /// Rows of `U₀` on the support, in support order.
    pub u0_block: Vec<Vec<f64>>,
}

impl From<&SpikedCovModel> for TruthFile {
    fn from(m: &SpikedCovModel) -> Self {
        let block = m.block();
        TruthFile {
            p: m.p(),
            r: m.r(),
            s: m.support.len(),
            support: m.support.clone(),
            lambda0: m.lambda0.clone(),
            sigma0_sq: m.sigma0_sq,
            u0_block: block
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        }
    }
}

impl TruthFile {
    pub fn to_model(&self) -> Result<SpikedCovModel> {
        if self.u0_block.len() != self.s || self.u0_block.iter().any(|r| r.len() != self.r) {
            return Err(Error::invalid(format!(
                "truth block is not {}x{}",
                self.s, self.r
            )));
        }
        let flat: Vec<f64> = self.u0_block.iter().flatten().copied().collect();
        let block = Mat::from_row_slice(self.s, self.r, &flat);
        SpikedCovModel::from_block(
            self.p,
            self.support.clone(),
            &block,
            self.lambda0.clone(),
            self.sigma0_sq,
        )
    }
}

pub fn write_truth(path: &Path, model: &SpikedCovModel) -> Result<()> {
    write_json(path, &TruthFile::from(model))
}

pub fn read_truth(path: &Path) -> Result<SpikedCovModel> {
    read_json::<TruthFile>(path)?.to_model()
}

pub const CHAIN_FORMAT: &str = "spikecov-chain";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainEncoding {
    /// Little-endian `f64` values and `ξ` bytes.
    Binary,
    Csv,
}

/// First line of a chain file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub format: String,
    pub version: u32,
    pub encoding: ChainEncoding,
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub n_draws: usize,
    pub seed: u64,
    pub hyper: MsslHyper,
    pub mcmc: McmcConfig,
}

impl ChainHeader {
    pub fn new(
        n: usize,
        hyper: &MsslHyper,
        mcmc: &McmcConfig,
        n_draws: usize,
        encoding: ChainEncoding,
    ) -> Self {
        ChainHeader {
            format: CHAIN_FORMAT.into(),
            version: 1,
            encoding,
            n,
            p: hyper.p,
            r: hyper.r,
            n_draws,
            seed: mcmc.seed,
            hyper: *hyper,
            mcmc: *mcmc,
        }
    }
}

pub fn write_chain(path: &Path, header: &ChainHeader, draws: &[Draw]) -> Result<()> {
    if header.n_draws != draws.len() {
        return Err(Error::invalid(format!(
            "header declares {} draws but {} were given",
            header.n_draws,
            draws.len()
        )));
    }
    let (p, r) = (header.p, header.r);
    if let Some(d) = draws
        .iter()
        .find(|d| d.b.shape() != (p, r) || d.xi.len() != p)
    {
        return Err(Error::shape(
            format!("{p}x{r}"),
            format!("{}x{}", d.b.nrows(), d.b.ncols()),
        ));
    }
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut f, header)?;
    f.write_all(b"\n")?;
    match header.encoding {
        ChainEncoding::Binary => {
            for d in draws {
                for j in 0..p {
                    for k in 0..r {
                        f.write_all(&d.b[(j, k)].to_le_bytes())?;
                    }
                }
                f.write_all(&d.sigma2.to_le_bytes())?;
                let xi: Vec<u8> = d.xi.iter().map(|&x| x as u8).collect();
                f.write_all(&xi)?;
            }
            f.flush()?;
        }
        ChainEncoding::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
            let mut rec = Vec::with_capacity(p * r + 1 + p);
            for d in draws {
                rec.clear();
                for j in 0..p {
                    for k in 0..r {
                        rec.push(format_value(d.b[(j, k)]));
                    }
                }
                rec.push(format_value(d.sigma2));
                rec.extend(d.xi.iter().map(|&x| if x { "1" } else { "0" }.to_string()));
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn read_chain(path: &Path) -> Result<(ChainHeader, Vec<Draw>)> {
    let mut rdr = BufReader::new(File::open(path)?);
    let mut line = Vec::new();
    rdr.read_until(b'\n', &mut line)?;
    let header: ChainHeader = serde_json::from_slice(&line)
        .map_err(|e| parse_err(path, format!("bad chain header: {e}")))?;
    if header.format != CHAIN_FORMAT {
        return Err(parse_err(
            path,
            format!("not a chain file (format {:?})", header.format),
        ));
    }
    let (p, r) = (header.p, header.r);
    let mut draws = Vec::with_capacity(header.n_draws);
    match header.encoding {
        ChainEncoding::Binary => {
            let mut buf = vec![0u8; 8 * (p * r + 1) + p];
            for i in 0..header.n_draws {
                rdr.read_exact(&mut buf)
                    .map_err(|e| parse_err(path, format!("draw {i}: {e}")))?;
                let f =
                    |idx: usize| f64::from_le_bytes(buf[8 * idx..8 * idx + 8].try_into().unwrap());
                let b = Mat::from_fn(p, r, |j, k| f(j * r + k));
                let sigma2 = f(p * r);
                let xi = buf[8 * (p * r + 1)..].iter().map(|&x| x != 0).collect();
                draws.push(Draw { b, sigma2, xi });
            }
        }
        ChainEncoding::Csv => {
            let mut csv_rdr = csv::ReaderBuilder::new()
                .has_headers(false)
                .from_reader(rdr);
            for (i, rec) in csv_rdr.records().enumerate() {
                let rec = rec?;
                if rec.len() != p * r + 1 + p {
                    return Err(parse_err(
                        path,
                        format!("draw {i} has {} fields", rec.len()),
                    ));
                }
                let num = |idx: usize| -> Result<f64> {
                    rec[idx].parse().map_err(|_| {
                        parse_err(path, format!("draw {i}: bad number {:?}", &rec[idx]))
                    })
                };
                let mut b = Mat::zeros(p, r);
                for j in 0..p {
                    for k in 0..r {
                        b[(j, k)] = num(j * r + k)?;
                    }
                }
                let sigma2 = num(p * r)?;
                let xi = (0..p).map(|j| &rec[p * r + 1 + j] == "1").collect();
                draws.push(Draw { b, sigma2, xi });
            }
            if draws.len() != header.n_draws {
                return Err(parse_err(
                    path,
                    format!("expected {} draws, found {}", header.n_draws, draws.len()),
                ));
            }
        }
    }
    Ok((header, draws))
}
