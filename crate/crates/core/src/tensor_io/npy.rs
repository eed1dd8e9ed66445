//! NPY v1.0 / v2.0 reader and writer.
//!
//! Payloads are little-endian. Fortran-ordered files are transposed to C
//! order on load; files are always written in C order.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{DType, Result, Tensor, TensorData, TensorIoError};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

pub fn load_npy(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| TensorIoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_npy(&bytes)
}

pub fn save_npy(tensor: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| TensorIoError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut buf = Vec::with_capacity(128 + tensor.len() * tensor.dtype().size());
    write_npy(tensor, &mut buf).map_err(io_err)?;
    fs::write(path, buf).map_err(io_err)
}

pub fn parse_npy(bytes: &[u8]) -> Result<Tensor> {
    let malformed = |m: &str| TensorIoError::MalformedHeader(m.to_string());
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(malformed("missing \\x93NUMPY magic"));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_len, offset) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 => {
            if bytes.len() < 12 {
                return Err(malformed("truncated v2 header length"));
            }
            (
                u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                12,
            )
        }
        _ => {
            return Err(TensorIoError::MalformedHeader(format!(
                "unsupported format version {major}.{minor}"
            )))
        }
    };
    let header_end = offset + header_len;
    if bytes.len() < header_end {
        return Err(malformed("header extends past end of file"));
    }
    let header = std::str::from_utf8(&bytes[offset..header_end])
        .map_err(|_| malformed("header is not valid text"))?;
    let header = Header::parse(header)?;

    let count: usize = header.shape.iter().product();
    let expected = count * header.dtype.size();
    let payload = &bytes[header_end..];
    if payload.len() < expected {
        return Err(TensorIoError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let payload = &payload[..expected];
    let data = decode(header.dtype, payload);
    let data = if header.fortran_order && header.shape.len() > 1 {
        fortran_to_c(&header.shape, data)
    } else {
        data
    };
    Tensor::new(header.shape, data)
}

pub fn write_npy<W: Write>(tensor: &Tensor, mut w: W) -> std::io::Result<()> {
    let descr = match tensor.dtype() {
        DType::Float32 => "<f4",
        DType::Float64 => "<f8",
        DType::UInt8 => "|u1",
        DType::Int64 => "<i8",
    };
    let shape = match tensor.shape() {
        [] => "()".to_string(),
        [n] => format!("({n},)"),
        dims => format!(
            "({})",
            dims.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut dict = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape}, }}");

    // Pad with spaces so that magic + version + length + dict (+ '\n') is 64-aligned.
    let version: u8 = if dict.len() + 1 + 10 > u16::MAX as usize { 2 } else { 1 };
    let prefix = if version == 1 { 10 } else { 12 };
    let total = (prefix + dict.len() + 1).div_ceil(ALIGN) * ALIGN;
    dict.push_str(&" ".repeat(total - prefix - dict.len() - 1));
    dict.push('\n');

    w.write_all(MAGIC)?;
    w.write_all(&[version, 0])?;
    if version == 1 {
        w.write_all(&(dict.len() as u16).to_le_bytes())?;
    } else {
        w.write_all(&(dict.len() as u32).to_le_bytes())?;
    }
    w.write_all(dict.as_bytes())?;

    match tensor.data() {
        TensorData::F32(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes())),
        TensorData::F64(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes())),
        TensorData::U8(v) => w.write_all(v),
        TensorData::I64(v) => v.iter().try_for_each(|x| w.write_all(&x.to_le_bytes())),
    }
}

fn decode(dtype: DType, payload: &[u8]) -> TensorData {
    match dtype {
        DType::Float32 => TensorData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        DType::Float64 => TensorData::F64(
            payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        DType::UInt8 => TensorData::U8(payload.to_vec()),
        DType::Int64 => TensorData::I64(
            payload
                .chunks_exact(8)
                .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    }
}

fn fortran_to_c(shape: &[usize], data: TensorData) -> TensorData {
    fn permute<T: Copy>(shape: &[usize], src: &[T]) -> Vec<T> {
        let count = src.len();
        if count == 0 {
            return Vec::new();
        }
        // Fortran strides: first axis fastest.
        let mut fstride = vec![1usize; shape.len()];
        for k in 1..shape.len() {
            fstride[k] = fstride[k - 1] * shape[k - 1];
        }
        let mut idx = vec![0usize; shape.len()];
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let off: usize = idx.iter().zip(&fstride).map(|(i, s)| i * s).sum();
            out.push(src[off]);
            // advance the C-order multi-index (last axis fastest)
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }
    match data {
        TensorData::F32(v) => TensorData::F32(permute(shape, &v)),
        TensorData::F64(v) => TensorData::F64(permute(shape, &v)),
        TensorData::U8(v) => TensorData::U8(permute(shape, &v)),
        TensorData::I64(v) => TensorData::I64(permute(shape, &v)),
    }
}

struct Header {
    dtype: DType,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Values of the Python-literal header dictionary.
#[derive(Debug)]
enum Literal {
    Str(String),
    Bool(bool),
    Int(usize),
    Tuple(Vec<Literal>),
}

impl Header {
    fn parse(text: &str) -> Result<Self> {
        let mut p = LiteralParser {
            s: text.trim_end().as_bytes(),
            pos: 0,
        };
        let entries = p.dict()?;
        let mut descr = None;
        let mut fortran = None;
        let mut shape = None;
        for (key, value) in entries {
            match (key.as_str(), value) {
                ("descr", Literal::Str(s)) => descr = Some(s),
                ("fortran_order", Literal::Bool(b)) => fortran = Some(b),
                ("shape", Literal::Tuple(items)) => {
                    let dims = items
                        .into_iter()
                        .map(|v| match v {
                            Literal::Int(n) => Ok(n),
                            other => Err(TensorIoError::MalformedHeader(format!(
                                "non-integer shape entry {other:?}"
                            ))),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    shape = Some(dims);
                }
                (k, v) => {
                    return Err(TensorIoError::MalformedHeader(format!(
                        "unexpected header entry {k}: {v:?}"
                    )))
                }
            }
        }
        let missing = |k: &str| TensorIoError::MalformedHeader(format!("header lacks `{k}`"));
        let descr = descr.ok_or_else(|| missing("descr"))?;
        let dtype = match descr.as_str() {
            "<f4" | "=f4" => DType::Float32,
            "<f8" | "=f8" => DType::Float64,
            "|u1" | "<u1" | "=u1" | "u1" => DType::UInt8,
            "<i8" | "=i8" => DType::Int64,
            other => return Err(TensorIoError::UnsupportedDtype(other.to_string())),
        };
        Ok(Self {
            dtype,
            fortran_order: fortran.ok_or_else(|| missing("fortran_order"))?,
            shape: shape.ok_or_else(|| missing("shape"))?,
        })
    }
}

struct LiteralParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl LiteralParser<'_> {
    fn err(&self, what: &str) -> TensorIoError {
        TensorIoError::MalformedHeader(format!("{what} at byte {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn dict(&mut self) -> Result<Vec<(String, Literal)>> {
        if !self.eat(b'{') {
            return Err(self.err("expected `{`"));
        }
        let mut out = Vec::new();
        loop {
            if self.eat(b'}') {
                break;
            }
            let key = match self.value()? {
                Literal::Str(s) => s,
                _ => return Err(self.err("dictionary key must be a string")),
            };
            if !self.eat(b':') {
                return Err(self.err("expected `:`"));
            }
            out.push((key, self.value()?));
            if !self.eat(b',') {
                if self.eat(b'}') {
                    break;
                }
                return Err(self.err("expected `,` or `}`"));
            }
        }
        self.skip_ws();
        if self.pos != self.s.len() {
            return Err(self.err("trailing characters after header dictionary"));
        }
        Ok(out)
    }

    fn value(&mut self) -> Result<Literal> {
        self.skip_ws();
        match self.s.get(self.pos) {
            Some(&q @ (b'\'' | b'"')) => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos] != q {
                    self.pos += 1;
                }
                if self.pos == self.s.len() {
                    return Err(self.err("unterminated string"));
                }
                let text = String::from_utf8_lossy(&self.s[start..self.pos]).into_owned();
                self.pos += 1;
                Ok(Literal::Str(text))
            }
            Some(b'(') | Some(b'[') => {
                let close = if self.s[self.pos] == b'(' { b')' } else { b']' };
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    if self.eat(close) {
                        break;
                    }
                    items.push(self.value()?);
                    if !self.eat(b',') {
                        if self.eat(close) {
                            break;
                        }
                        return Err(self.err("expected `,` or tuple close"));
                    }
                }
                Ok(Literal::Tuple(items))
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                // numpy may emit `3L` on very old writers
                if self.s.get(self.pos) == Some(&b'L') {
                    self.pos += 1;
                }
                let digits = std::str::from_utf8(&self.s[start..self.pos])
                    .unwrap()
                    .trim_end_matches('L');
                digits
                    .parse()
                    .map(Literal::Int)
                    .map_err(|_| self.err("integer out of range"))
            }
            _ if self.s[self.pos..].starts_with(b"True") => {
                self.pos += 4;
                Ok(Literal::Bool(true))
            }
            _ if self.s[self.pos..].starts_with(b"False") => {
                self.pos += 5;
                Ok(Literal::Bool(false))
            }
            _ => Err(self.err("unrecognized literal")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn npy_bytes(header: &str, payload: &[u8]) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&[1, 0]);
        out.extend_from_slice(&(header.len() as u16).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn identity_3x3_float64() {
        let eye: Vec<f64> = vec![1., 0., 0., 0., 1., 0., 0., 0., 1.];
        let payload: Vec<u8> = eye.iter().flat_map(|x| x.to_le_bytes()).collect();
        let bytes = npy_bytes(
            "{'descr': '<f8', 'fortran_order': False, 'shape': (3, 3), }\n",
            &payload,
        );
        let t = parse_npy(&bytes).unwrap();
        assert_eq!(t.shape(), &[3, 3]);
        assert_eq!(t.to_f64_vec(), eye);
    }

    #[test]
    fn empty_file_is_malformed() {
        assert!(matches!(
            parse_npy(&[]),
            Err(TensorIoError::MalformedHeader(_))
        ));
    }

    #[test]
    fn bad_version_is_malformed() {
        let mut bytes = npy_bytes("{'descr': '<f8', 'fortran_order': False, 'shape': (), }", &[0; 8]);
        bytes[6] = 9;
        assert!(matches!(
            parse_npy(&bytes),
            Err(TensorIoError::MalformedHeader(_))
        ));
    }

    #[test]
    fn unsupported_dtype() {
        let bytes = npy_bytes("{'descr': '<c16', 'fortran_order': False, 'shape': (1,), }", &[0; 16]);
        assert!(matches!(
            parse_npy(&bytes),
            Err(TensorIoError::UnsupportedDtype(d)) if d == "<c16"
        ));
        let bytes = npy_bytes("{'descr': '>f8', 'fortran_order': False, 'shape': (1,), }", &[0; 8]);
        assert!(matches!(parse_npy(&bytes), Err(TensorIoError::UnsupportedDtype(_))));
    }

    #[test]
    fn truncated_payload() {
        let bytes = npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (4,), }", &[0; 10]);
        assert!(matches!(
            parse_npy(&bytes),
            Err(TensorIoError::TruncatedPayload {
                expected: 16,
                found: 10
            })
        ));
    }

    #[test]
    fn fortran_order_is_transposed() {
        // C-order [[1,2,3],[4,5,6]] stored column-major: 1,4,2,5,3,6
        let payload: Vec<u8> = [1i64, 4, 2, 5, 3, 6]
            .iter()
            .flat_map(|x| x.to_le_bytes())
            .collect();
        let bytes = npy_bytes("{'descr': '<i8', 'fortran_order': True, 'shape': (2, 3), }", &payload);
        let t = parse_npy(&bytes).unwrap();
        assert_eq!(t.as_i64().unwrap(), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn header_is_64_byte_aligned() {
        let t = Tensor::from_f64(vec![2], vec![1.5, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_npy(&t, &mut buf).unwrap();
        let header_len = u16::from_le_bytes([buf[8], buf[9]]) as usize;
        assert_eq!((10 + header_len) % 64, 0);
        assert_eq!(buf[10 + header_len - 1], b'\n');
        assert!(parse_npy(&buf).unwrap().bits_eq(&t));
    }

    #[test]
    fn scalar_and_zero_length_shapes() {
        for shape in [vec![], vec![0], vec![3, 0, 2], vec![1, 1, 1]] {
            let n: usize = shape.iter().product();
            let t = Tensor::new(shape, TensorData::U8(vec![7; n])).unwrap();
            let mut buf = Vec::new();
            write_npy(&t, &mut buf).unwrap();
            assert!(parse_npy(&buf).unwrap().bits_eq(&t));
        }
    }
}
