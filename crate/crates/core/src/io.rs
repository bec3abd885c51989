//! Binary and text file formats.
//!
//! All binary formats start with an ASCII magic line and store integers and
//! floats little-endian:
//!
//! | format | layout after the magic |
//! |--------|------------------------|
//! | `DTEN1` | `d: u32`, `d × u64` dims, values (`f64`, row-major) |
//! | `CPD1` | `d: u32`, `r: u64`, `d × u64` dims, `r` weights, factors row-major (`n_μ × r`) |
//! | `TUCK1` | `d: u32`, `d × u64` dims, `d × u64` ranks, core values, factors row-major (`n_μ × r_μ`) |
//! | `TTEN1` | `d: u32`, `d × u64` dims, `d + 1` ranks, cores (`r_{μ−1} × n_μ × r_μ`, row-major) |
//!
//! The `.dtent` text form is `d`, then the dims, then the values, all
//! whitespace-separated; `#` starts a comment.

use std::path::Path;

use nalgebra::DMatrix;

use crate::cp::CpDecomposition;
use crate::error::{Result, TensorError};
use crate::funcgrid::{Mesh, MonomialPoly};
use crate::tensor::DenseTensor;
use crate::tt::TtTensor;
use crate::tucker::TuckerDecomposition;

pub const DTEN_MAGIC: &[u8] = b"DTEN1\n";
pub const CPD_MAGIC: &[u8] = b"CPD1\n";
pub const TUCK_MAGIC: &[u8] = b"TUCK1\n";
pub const TTEN_MAGIC: &[u8] = b"TTEN1\n";

fn format_err<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(TensorError::Format {
        offset: offset as u64,
        message: message.into(),
    })
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    fn magic(&mut self, magic: &[u8]) -> Result<()> {
        for (k, &b) in magic.iter().enumerate() {
            match self.data.get(k) {
                Some(&got) if got == b => {}
                Some(&got) => {
                    return format_err(
                        k,
                        format!(
                            "bad magic byte 0x{got:02x}, expected {:?}",
                            String::from_utf8_lossy(magic)
                        ),
                    )
                }
                None => return format_err(k, "file ends inside the magic"),
            }
        }
        self.pos = magic.len();
        Ok(())
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return format_err(self.pos, format!("file ends while reading {what}"));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<usize> {
        let at = self.pos;
        let v = u64::from_le_bytes(self.take(8, what)?.try_into().unwrap());
        usize::try_from(v).or_else(|_| format_err(at, format!("{what} {v} does not fit in memory")))
    }

    fn sizes(&mut self, n: usize, what: &str) -> Result<Vec<usize>> {
        (0..n).map(|_| self.u64(what)).collect()
    }

    /// `count` floats, checking the length up front so corrupt headers
    /// cannot trigger huge allocations.
    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let remaining = (self.data.len() - self.pos) / 8;
        if count > remaining {
            return format_err(
                self.pos,
                format!("{what} needs {count} values but only {remaining} remain"),
            );
        }
        let bytes = self.take(count * 8, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn order(&mut self) -> Result<usize> {
        let at = self.pos;
        let d = self.u32("order")? as usize;
        if d == 0 {
            return format_err(at, "order must be at least 1");
        }
        Ok(d)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return format_err(
                self.pos,
                format!("{} trailing bytes", self.data.len() - self.pos),
            );
        }
        Ok(())
    }
}

fn product(dims: &[usize], at: usize) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .map_or_else(|| format_err(at, "dimension product overflows"), Ok)
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(magic: &[u8]) -> Self {
        Writer(magic.to_vec())
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn matrix(&mut self, m: &DMatrix<f64>) {
        self.f64s(m.transpose().as_slice());
    }
}

pub fn encode_dten(t: &DenseTensor) -> Vec<u8> {
    let mut w = Writer::new(DTEN_MAGIC);
    w.u32(t.order());
    t.dims().iter().for_each(|&n| w.u64(n));
    w.f64s(t.values());
    w.0
}

pub fn decode_dten(data: &[u8]) -> Result<DenseTensor> {
    let mut r = Reader::new(data);
    r.magic(DTEN_MAGIC)?;
    let d = r.order()?;
    let at = r.pos;
    let dims = r.sizes(d, "dimension")?;
    let values = r.f64s(product(&dims, at)?, "tensor values")?;
    r.finish()?;
    DenseTensor::new(dims, values).or_else(|e| format_err(at, e.to_string()))
}

pub fn encode_cp(cp: &CpDecomposition) -> Vec<u8> {
    let mut w = Writer::new(CPD_MAGIC);
    w.u32(cp.order());
    w.u64(cp.rank());
    cp.dims().iter().for_each(|&n| w.u64(n));
    w.f64s(&cp.weights);
    cp.factors.iter().for_each(|f| w.matrix(f));
    w.0
}

pub fn decode_cp(data: &[u8]) -> Result<CpDecomposition> {
    let mut r = Reader::new(data);
    r.magic(CPD_MAGIC)?;
    let d = r.order()?;
    let at = r.pos;
    let rank = r.u64("rank")?;
    if rank == 0 {
        return format_err(at, "CP rank must be at least 1");
    }
    let dims = r.sizes(d, "dimension")?;
    let weights = r.f64s(rank, "weights")?;
    let mut factors = Vec::with_capacity(d);
    for &n in &dims {
        let values = r.f64s(product(&[n, rank], r.pos)?, "factor values")?;
        factors.push(DMatrix::from_row_slice(n, rank, &values));
    }
    r.finish()?;
    // stored columns are already unit-norm; keep them bit-for-bit
    Ok(CpDecomposition { weights, factors })
}

pub fn encode_tucker(t: &TuckerDecomposition) -> Vec<u8> {
    let mut w = Writer::new(TUCK_MAGIC);
    w.u32(t.factors.len());
    t.dims().iter().for_each(|&n| w.u64(n));
    t.ranks().iter().for_each(|&n| w.u64(n));
    w.f64s(t.core.values());
    t.factors.iter().for_each(|f| w.matrix(f));
    w.0
}

pub fn decode_tucker(data: &[u8]) -> Result<TuckerDecomposition> {
    let mut r = Reader::new(data);
    r.magic(TUCK_MAGIC)?;
    let d = r.order()?;
    let dims = r.sizes(d, "dimension")?;
    let at = r.pos;
    let ranks = r.sizes(d, "rank")?;
    if let Some(mu) = ranks.iter().zip(&dims).position(|(&k, &n)| k == 0 || k > n) {
        return format_err(
            at + 8 * mu,
            format!("rank {} invalid for dimension {}", ranks[mu], dims[mu]),
        );
    }
    let core_at = r.pos;
    let core = r.f64s(product(&ranks, core_at)?, "core values")?;
    let core =
        DenseTensor::new(ranks.clone(), core).or_else(|e| format_err(core_at, e.to_string()))?;
    let mut factors = Vec::with_capacity(d);
    for (&n, &k) in dims.iter().zip(&ranks) {
        let values = r.f64s(n * k, "factor values")?;
        factors.push(DMatrix::from_row_slice(n, k, &values));
    }
    r.finish()?;
    Ok(TuckerDecomposition { core, factors })
}

pub fn encode_tt(t: &TtTensor) -> Vec<u8> {
    let mut w = Writer::new(TTEN_MAGIC);
    w.u32(t.order());
    t.dims().iter().for_each(|&n| w.u64(n));
    t.boundary_ranks().iter().for_each(|&n| w.u64(n));
    t.cores().iter().for_each(|c| w.f64s(c.values()));
    w.0
}

pub fn decode_tt(data: &[u8]) -> Result<TtTensor> {
    let mut r = Reader::new(data);
    r.magic(TTEN_MAGIC)?;
    let d = r.order()?;
    let dims = r.sizes(d, "dimension")?;
    let at = r.pos;
    let ranks = r.sizes(d + 1, "rank")?;
    if ranks[0] != 1 || ranks[d] != 1 || ranks.contains(&0) {
        return format_err(at, format!("invalid TT ranks {ranks:?}"));
    }
    let mut cores = Vec::with_capacity(d);
    for mu in 0..d {
        let core_dims = vec![ranks[mu], dims[mu], ranks[mu + 1]];
        let core_at = r.pos;
        let values = r.f64s(product(&core_dims, core_at)?, "core values")?;
        cores.push(
            DenseTensor::new(core_dims, values).or_else(|e| format_err(core_at, e.to_string()))?,
        );
    }
    r.finish()?;
    TtTensor::new(cores).or_else(|e| format_err(at, e.to_string()))
}

/// Parses the `.dtent` text form.
pub fn parse_dtent(text: &str) -> Result<DenseTensor> {
    let mut tokens = text.lines().enumerate().flat_map(|(k, line)| {
        let line = line.split('#').next().unwrap_or("");
        line.split_whitespace().map(move |tok| (k + 1, tok))
    });
    let mut last_line = 1;
    let mut next_usize = |what: &str| -> Result<usize> {
        let (line, tok) = tokens.next().ok_or_else(|| TensorError::Parse {
            line: last_line,
            message: format!("missing {what}"),
        })?;
        last_line = line;
        tok.parse().map_err(|_| TensorError::Parse {
            line,
            message: format!("bad {what} {tok:?}"),
        })
    };
    let d = next_usize("order")?;
    if d == 0 {
        return Err(TensorError::Parse {
            line: last_line,
            message: "order must be at least 1".into(),
        });
    }
    let dims = (0..d)
        .map(|_| next_usize("dimension"))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::new();
    for (line, tok) in tokens {
        values.push(tok.parse::<f64>().map_err(|_| TensorError::Parse {
            line,
            message: format!("bad value {tok:?}"),
        })?);
    }
    let expected: usize = dims.iter().product();
    if values.len() != expected {
        return Err(TensorError::Parse {
            line: text.lines().count().max(1),
            message: format!(
                "expected {expected} values for dims {dims:?}, found {}",
                values.len()
            ),
        });
    }
    DenseTensor::new(dims, values)
}

pub fn format_dtent(t: &DenseTensor) -> String {
    let mut out = format!("{}\n", t.order());
    out.push_str(
        &t.dims()
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    out.push('\n');
    for v in t.values() {
        out.push_str(&format!("{v:?}\n"));
    }
    out
}

fn is_text(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "dtent")
}

/// Reads a dense tensor: `.dtent` files as text, anything else as `DTEN1`.
pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    if is_text(path) {
        parse_dtent(&std::fs::read_to_string(path)?)
    } else {
        decode_dten(&std::fs::read(path)?)
    }
}

pub fn write_tensor(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    let path = path.as_ref();
    if is_text(path) {
        std::fs::write(path, format_dtent(t))?;
    } else {
        std::fs::write(path, encode_dten(t))?;
    }
    Ok(())
}

/// Any of the three decomposition formats.
#[derive(Debug, Clone)]
pub enum Decomposition {
    Cp(CpDecomposition),
    Tucker(TuckerDecomposition),
    Tt(TtTensor),
}

impl Decomposition {
    pub fn dims(&self) -> Vec<usize> {
        match self {
            Decomposition::Cp(c) => c.dims(),
            Decomposition::Tucker(t) => t.dims(),
            Decomposition::Tt(t) => t.dims(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Decomposition::Cp(c) => encode_cp(c),
            Decomposition::Tucker(t) => encode_tucker(t),
            Decomposition::Tt(t) => encode_tt(t),
        }
    }
}

/// Dispatches on the magic line.
pub fn decode_decomposition(data: &[u8]) -> Result<Decomposition> {
    if data.starts_with(CPD_MAGIC) {
        decode_cp(data).map(Decomposition::Cp)
    } else if data.starts_with(TUCK_MAGIC) {
        decode_tucker(data).map(Decomposition::Tucker)
    } else if data.starts_with(TTEN_MAGIC) {
        decode_tt(data).map(Decomposition::Tt)
    } else {
        format_err(0, "unrecognized magic, expected CPD1, TUCK1 or TTEN1")
    }
}

pub fn read_decomposition(path: impl AsRef<Path>) -> Result<Decomposition> {
    decode_decomposition(&std::fs::read(path)?)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// One mesh per non-empty line, points ascending.
pub fn parse_meshes(text: &str) -> Result<Vec<Mesh>> {
    let meshes = content_lines(text)
        .map(|(line, l)| {
            let pts = l
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| TensorError::Parse {
                        line,
                        message: format!("bad mesh point {t:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Mesh::new(pts).map_err(|e| TensorError::Parse {
                line,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if meshes.is_empty() {
        return Err(TensorError::Parse {
            line: 1,
            message: "no meshes".into(),
        });
    }
    Ok(meshes)
}

/// Lines `coeff e₁ … e_d`; the arity comes from the first term.
pub fn parse_poly(text: &str) -> Result<MonomialPoly> {
    let mut terms = Vec::new();
    let mut arity = None;
    for (line, l) in content_lines(text) {
        let mut toks = l.split_whitespace();
        let c_tok = toks.next().unwrap();
        let c: f64 = c_tok.parse().map_err(|_| TensorError::Parse {
            line,
            message: format!("bad coefficient {c_tok:?}"),
        })?;
        let exps = toks
            .map(|t| {
                t.parse::<u32>().map_err(|_| TensorError::Parse {
                    line,
                    message: format!("bad exponent {t:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let d = *arity.get_or_insert(exps.len());
        if d == 0 || exps.len() != d {
            return Err(TensorError::Parse {
                line,
                message: format!("expected {} exponents, found {}", d.max(1), exps.len()),
            });
        }
        terms.push((c, exps));
    }
    let Some(d) = arity else {
        return Err(TensorError::Parse {
            line: 1,
            message: "no polynomial terms".into(),
        });
    };
    MonomialPoly::new(d, terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_tensor() -> impl Strategy<Value = DenseTensor> {
        prop::collection::vec(1usize..4, 1..4).prop_flat_map(|dims| {
            let n: usize = dims.iter().product();
            prop::collection::vec(-1e6f64..1e6, n)
                .prop_map(move |v| DenseTensor::new(dims.clone(), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn dten_round_trip(t in small_tensor()) {
            let back = decode_dten(&encode_dten(&t)).unwrap();
            prop_assert_eq!(back.dims(), t.dims());
            prop_assert_eq!(back.values(), t.values());
            let text = parse_dtent(&format_dtent(&t)).unwrap();
            prop_assert_eq!(text.values(), t.values());
        }

        #[test]
        fn truncated_files_are_rejected(t in small_tensor(), cut in 0usize..64) {
            let bytes = encode_dten(&t);
            let cut = cut.min(bytes.len() - 1);
            let err = decode_dten(&bytes[..cut]).unwrap_err();
            prop_assert!(matches!(err, TensorError::Format { .. }), "unexpected error kind");
        }
    }

    #[test]
    fn corrupted_magic_names_offset() {
        let mut bytes = encode_dten(&DenseTensor::zeros(&[2]).unwrap());
        bytes[2] = b'X';
        match decode_dten(&bytes) {
            Err(TensorError::Format { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("unexpected {other:?}"),
        }
        let mut long = encode_dten(&DenseTensor::zeros(&[2]).unwrap());
        long.push(0);
        assert!(decode_dten(&long).is_err());
    }

    #[test]
    fn decomposition_round_trips() {
        let cp = CpDecomposition::from_factors(
            vec![2.0, -1.0],
            vec![
                DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
                DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            ],
        )
        .unwrap();
        let back = decode_cp(&encode_cp(&cp)).unwrap();
        assert_eq!(back.weights, cp.weights);
        assert_eq!(back.factors, cp.factors);

        let tucker = TuckerDecomposition {
            core: DenseTensor::new(vec![1, 2], vec![3.0, 4.0]).unwrap(),
            factors: vec![
                DMatrix::from_row_slice(2, 1, &[0.6, 0.8]),
                DMatrix::identity(2, 2),
            ],
        };
        let back = decode_tucker(&encode_tucker(&tucker)).unwrap();
        assert_eq!(back.core.values(), tucker.core.values());
        assert_eq!(back.factors, tucker.factors);

        let tt = crate::tt::additive_tt(&[vec![1.0, 2.0], vec![3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let back = decode_tt(&encode_tt(&tt)).unwrap();
        assert_eq!(back.boundary_ranks(), vec![1, 2, 2, 1]);
        for (a, b) in back.cores().iter().zip(tt.cores()) {
            assert_eq!(a.values(), b.values());
        }
        assert!(matches!(
            decode_decomposition(&encode_tt(&tt)),
            Ok(Decomposition::Tt(_))
        ));
        assert!(decode_decomposition(b"NOPE\n").is_err());
    }

    #[test]
    fn text_parsers() {
        let t = parse_dtent("# two by two\n2\n2 2\n1 2\n3 4\n").unwrap();
        assert_eq!(t.at(&[1, 0]), 3.0);
        assert!(matches!(
            parse_dtent("2\n2 2\n1 2 3\n"),
            Err(TensorError::Parse { .. })
        ));
        assert!(matches!(
            parse_dtent("2\n2 x\n"),
            Err(TensorError::Parse { line: 2, .. })
        ));

        let meshes = parse_meshes("0 1 2\n\n-1 1\n").unwrap();
        assert_eq!(meshes.len(), 2);
        assert!(matches!(
            parse_meshes("0 1\n1 0\n"),
            Err(TensorError::Parse { line: 2, .. })
        ));

        let p = parse_poly("1 2 0\n2 1 1\n1 0 2\n").unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.eval(&[1.0, 2.0]), 9.0);
        assert!(matches!(
            parse_poly("1 2 0\n2 1\n"),
            Err(TensorError::Parse { line: 2, .. })
        ));
        assert!(parse_poly("\n").is_err());
    }
}
