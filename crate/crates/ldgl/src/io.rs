//! Field dumps and atomic file writes.
//!
//! Binary layout, little endian throughout:
//! `b"LDGLFLD1"`, `u32` array count, then per array a `u16` name length and
//! UTF-8 name, a dtype byte (`1` = f64, `2` = complex f64 as re/im pairs),
//! a `u8` rank, `u64` extents and the row-major data.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{ContinuumConfiguration, LayerStack, LayeredConfiguration, Potential3D, C64};

const MAGIC: &[u8; 8] = b"LDGLFLD1";

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: ArrayData,
}

impl NamedArray {
    fn len(&self) -> usize {
        match &self.data {
            ArrayData::Real(v) => v.len(),
            ArrayData::Complex(v) => v.len(),
        }
    }
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn encode_arrays(arrays: &[NamedArray]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    for a in arrays {
        if a.dims.iter().product::<usize>() != a.len() {
            return Err(Error::Shape(format!("array {} extents vs length", a.name)));
        }
        let name = a.name.as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(match a.data {
            ArrayData::Real(_) => 1,
            ArrayData::Complex(_) => 2,
        });
        out.push(a.dims.len() as u8);
        for d in &a.dims {
            out.extend_from_slice(&(*d as u64).to_le_bytes());
        }
        match &a.data {
            ArrayData::Real(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ArrayData::Complex(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
        }
    }
    Ok(out)
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.b.len() {
            return Err(Error::Shape("truncated field file".into()));
        }
        let s = &self.b[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_arrays(bytes: &[u8]) -> Result<Vec<NamedArray>> {
    let mut r = Reader { b: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Shape("not a field file (bad magic)".into()));
    }
    let count = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let nlen = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(r.take(nlen)?.to_vec())
            .map_err(|_| Error::Shape("array name is not UTF-8".into()))?;
        let dtype = r.take(1)?[0];
        let rank = r.take(1)?[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u64()? as usize);
        }
        let n: usize = dims.iter().product();
        let data = match dtype {
            1 => ArrayData::Real((0..n).map(|_| r.f64()).collect::<Result<_>>()?),
            2 => ArrayData::Complex(
                (0..n)
                    .map(|_| Ok(C64::new(r.f64()?, r.f64()?)))
                    .collect::<Result<_>>()?,
            ),
            t => return Err(Error::Shape(format!("unknown dtype {t}"))),
        };
        out.push(NamedArray { name, dims, data });
    }
    if r.pos != bytes.len() {
        return Err(Error::Shape("trailing bytes in field file".into()));
    }
    Ok(out)
}

fn pot_arrays(p: &Potential3D) -> Vec<NamedArray> {
    let [nx, ny, nz] = p.dims;
    vec![
        NamedArray {
            name: "a1".into(),
            dims: vec![nz, ny, nx - 1],
            data: ArrayData::Real(p.a1.clone()),
        },
        NamedArray {
            name: "a2".into(),
            dims: vec![nz, ny - 1, nx],
            data: ArrayData::Real(p.a2.clone()),
        },
        NamedArray {
            name: "a3".into(),
            dims: vec![nz - 1, ny, nx],
            data: ArrayData::Real(p.a3.clone()),
        },
        NamedArray {
            name: "h_ex".into(),
            dims: vec![1],
            data: ArrayData::Real(vec![p.h_ex]),
        },
    ]
}

fn find<'a>(arrays: &'a [NamedArray], name: &str) -> Result<&'a NamedArray> {
    arrays
        .iter()
        .find(|a| a.name == name)
        .ok_or_else(|| Error::Shape(format!("field file lacks array {name}")))
}

fn real(a: &NamedArray) -> Result<Vec<f64>> {
    match &a.data {
        ArrayData::Real(v) => Ok(v.clone()),
        _ => Err(Error::Shape(format!("array {} is not real", a.name))),
    }
}

fn complex(a: &NamedArray) -> Result<Vec<C64>> {
    match &a.data {
        ArrayData::Complex(v) => Ok(v.clone()),
        _ => Err(Error::Shape(format!("array {} is not complex", a.name))),
    }
}

fn read_pot(arrays: &[NamedArray]) -> Result<Potential3D> {
    let a1 = find(arrays, "a1")?;
    let a2 = find(arrays, "a2")?;
    if a1.dims.len() != 3 || a2.dims.len() != 3 {
        return Err(Error::Shape("link arrays must have rank 3".into()));
    }
    let dims = [a2.dims[2], a1.dims[1], a1.dims[0]];
    Ok(Potential3D {
        dims,
        a1: real(a1)?,
        a2: real(a2)?,
        a3: real(find(arrays, "a3")?)?,
        h_ex: real(find(arrays, "h_ex")?)?[0],
    })
}

pub fn encode_ld(st: &LayeredConfiguration) -> Result<Vec<u8>> {
    let l = &st.layers;
    let mut arrays = vec![NamedArray {
        name: "u".into(),
        dims: vec![l.u.len(), l.ny, l.nx],
        data: ArrayData::Complex(l.u.concat()),
    }];
    arrays.extend(pot_arrays(&st.pot));
    encode_arrays(&arrays)
}

pub fn decode_ld(bytes: &[u8]) -> Result<LayeredConfiguration> {
    let arrays = decode_arrays(bytes)?;
    let u = find(&arrays, "u")?;
    if u.dims.len() != 3 {
        return Err(Error::Shape("u must have rank 3".into()));
    }
    let (nl, ny, nx) = (u.dims[0], u.dims[1], u.dims[2]);
    let flat = complex(u)?;
    let layers = LayerStack {
        nx,
        ny,
        u: flat.chunks(nx * ny).map(|c| c.to_vec()).take(nl).collect(),
    };
    Ok(LayeredConfiguration {
        layers,
        pot: read_pot(&arrays)?,
    })
}

pub fn encode_agl(st: &ContinuumConfiguration) -> Result<Vec<u8>> {
    let mut arrays = vec![NamedArray {
        name: "psi".into(),
        dims: vec![st.nz, st.ny, st.nx],
        data: ArrayData::Complex(st.psi.clone()),
    }];
    arrays.extend(pot_arrays(&st.pot));
    encode_arrays(&arrays)
}

pub fn decode_agl(bytes: &[u8]) -> Result<ContinuumConfiguration> {
    let arrays = decode_arrays(bytes)?;
    let p = find(&arrays, "psi")?;
    if p.dims.len() != 3 {
        return Err(Error::Shape("psi must have rank 3".into()));
    }
    Ok(ContinuumConfiguration {
        nz: p.dims[0],
        ny: p.dims[1],
        nx: p.dims[2],
        psi: complex(p)?,
        pot: read_pot(&arrays)?,
    })
}

/// `x,y,re,im` rows of one layer, for plotting.
pub fn layer_csv(xs: &[f64], ys: &[f64], u: &[C64]) -> String {
    let mut s = String::from("x,y,re,im\n");
    for (j, y) in ys.iter().enumerate() {
        for (i, x) in xs.iter().enumerate() {
            let z = u[j * xs.len() + i];
            s.push_str(&format!("{x:e},{y:e},{:e},{:e}\n", z.re, z.im));
        }
    }
    s
}
