use rand::Rng;

use crate::graph::{DataKind, ElementKind, ImageFormat, PixelType};
use crate::ir::value::Value;

/// Row-major pixel storage; multi-channel formats are interleaved bytes.
#[derive(Clone, Debug, PartialEq)]
pub enum Pixels {
    U8(Vec<u8>),
    U16(Vec<u16>),
    S16(Vec<i16>),
    S32(Vec<i32>),
    U32(Vec<u32>),
    F32(Vec<f32>),
}

impl Pixels {
    pub fn len(&self) -> usize {
        match self {
            Pixels::U8(v) => v.len(),
            Pixels::U16(v) => v.len(),
            Pixels::S16(v) => v.len(),
            Pixels::S32(v) => v.len(),
            Pixels::U32(v) => v.len(),
            Pixels::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn zeros(t: PixelType, n: usize) -> Pixels {
        match t {
            PixelType::U8 => Pixels::U8(vec![0; n]),
            PixelType::U16 => Pixels::U16(vec![0; n]),
            PixelType::S16 => Pixels::S16(vec![0; n]),
            PixelType::S32 => Pixels::S32(vec![0; n]),
            PixelType::U32 => Pixels::U32(vec![0; n]),
            PixelType::F32 => Pixels::F32(vec![0.0; n]),
        }
    }

    #[inline]
    pub fn get(&self, i: usize) -> Value {
        match self {
            Pixels::U8(v) => Value::Int(v[i] as i64),
            Pixels::U16(v) => Value::Int(v[i] as i64),
            Pixels::S16(v) => Value::Int(v[i] as i64),
            Pixels::S32(v) => Value::Int(v[i] as i64),
            Pixels::U32(v) => Value::Int(v[i] as i64),
            Pixels::F32(v) => Value::Real(v[i] as f64),
        }
    }

    /// Stores a value already in range for the element type.
    #[inline]
    pub fn set(&mut self, i: usize, x: Value) {
        match (self, x) {
            (Pixels::U8(v), Value::Int(x)) => v[i] = x as u8,
            (Pixels::U16(v), Value::Int(x)) => v[i] = x as u16,
            (Pixels::S16(v), Value::Int(x)) => v[i] = x as i16,
            (Pixels::S32(v), Value::Int(x)) => v[i] = x as i32,
            (Pixels::U32(v), Value::Int(x)) => v[i] = x as u32,
            (Pixels::F32(v), x) => v[i] = x.as_f64() as f32,
            (p, x) => panic!("cannot store {x:?} in {p:?}"),
        }
    }

    /// Stores `xs` at consecutive indices starting at `start`.
    pub fn set_run(&mut self, start: usize, xs: &[Value]) {
        fn int(x: &Value) -> i64 {
            match x {
                Value::Int(i) => *i,
                Value::Real(r) => panic!("cannot store real {r} in an integer image"),
            }
        }
        let end = start + xs.len();
        match self {
            Pixels::U8(v) => v[start..end].iter_mut().zip(xs).for_each(|(d, x)| *d = int(x) as u8),
            Pixels::U16(v) => v[start..end].iter_mut().zip(xs).for_each(|(d, x)| *d = int(x) as u16),
            Pixels::S16(v) => v[start..end].iter_mut().zip(xs).for_each(|(d, x)| *d = int(x) as i16),
            Pixels::S32(v) => v[start..end].iter_mut().zip(xs).for_each(|(d, x)| *d = int(x) as i32),
            Pixels::U32(v) => v[start..end].iter_mut().zip(xs).for_each(|(d, x)| *d = int(x) as u32),
            Pixels::F32(v) => v[start..end].iter_mut().zip(xs).for_each(|(d, x)| *d = x.as_f64() as f32),
        }
    }

    /// Little-endian bytes.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        match self {
            Pixels::U8(v) => v.clone(),
            Pixels::U16(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Pixels::S16(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Pixels::S32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Pixels::U32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Pixels::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    pub fn from_le_bytes(t: PixelType, bytes: &[u8]) -> Option<Pixels> {
        let n = t.bytes();
        if bytes.len() % n != 0 {
            return None;
        }
        let chunks = bytes.chunks_exact(n);
        Some(match t {
            PixelType::U8 => Pixels::U8(bytes.to_vec()),
            PixelType::U16 => Pixels::U16(chunks.map(|c| u16::from_le_bytes([c[0], c[1]])).collect()),
            PixelType::S16 => Pixels::S16(chunks.map(|c| i16::from_le_bytes([c[0], c[1]])).collect()),
            PixelType::S32 => Pixels::S32(chunks.map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()),
            PixelType::U32 => Pixels::U32(chunks.map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()),
            PixelType::F32 => Pixels::F32(chunks.map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect()),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub format: ImageFormat,
    pub pixels: Pixels,
}

impl Image {
    /// Number of stored elements for a `width x height` image of `format`.
    pub fn storage_len(width: u32, height: u32, format: ImageFormat) -> usize {
        let n = width as usize * height as usize;
        match format {
            ImageFormat::Rgb => 3 * n,
            ImageFormat::Uyvy => 2 * n,
            _ => n,
        }
    }

    pub fn zeros(width: u32, height: u32, format: ImageFormat) -> Image {
        let t = format.channel_type().expect("concrete format");
        Image { width, height, format, pixels: Pixels::zeros(t, Self::storage_len(width, height, format)) }
    }

    pub fn from_pixels(width: u32, height: u32, format: ImageFormat, pixels: Pixels) -> Option<Image> {
        let img = Image { width, height, format, pixels };
        img.is_consistent().then_some(img)
    }

    pub fn is_consistent(&self) -> bool {
        let t = self.format.channel_type();
        let tag_ok = matches!(
            (t, &self.pixels),
            (Some(PixelType::U8), Pixels::U8(_))
                | (Some(PixelType::U16), Pixels::U16(_))
                | (Some(PixelType::S16), Pixels::S16(_))
                | (Some(PixelType::S32), Pixels::S32(_))
                | (Some(PixelType::U32), Pixels::U32(_))
                | (Some(PixelType::F32), Pixels::F32(_))
        );
        tag_ok && self.pixels.len() == Self::storage_len(self.width, self.height, self.format)
    }

    /// Storage index of channel `ch` at `(x, y)`.
    #[inline]
    pub fn index(&self, x: u32, y: u32, ch: u8) -> usize {
        let (x, y, w) = (x as usize, y as usize, self.width as usize);
        match self.format {
            ImageFormat::Rgb => (y * w + x) * 3 + ch as usize,
            // Byte order per pixel pair: U Y0 V Y1.
            ImageFormat::Uyvy => {
                let row = y * 2 * w;
                match ch {
                    0 => row + 2 * x + 1,
                    1 => row + 4 * (x / 2),
                    _ => row + 4 * (x / 2) + 2,
                }
            }
            _ => y * w + x,
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, ch: u8) -> Value {
        self.pixels.get(self.index(x, y, ch))
    }

    pub fn set(&mut self, x: u32, y: u32, ch: u8, v: Value) {
        let i = self.index(x, y, ch);
        self.pixels.set(i, v);
    }

    /// Uniform random content over the full range of the element type
    /// (F32: uniform in [-1024, 1024)).
    pub fn random(width: u32, height: u32, format: ImageFormat, rng: &mut impl Rng) -> Image {
        let n = Self::storage_len(width, height, format);
        let pixels = match format.channel_type().expect("concrete format") {
            PixelType::U8 => Pixels::U8((0..n).map(|_| rng.gen()).collect()),
            PixelType::U16 => Pixels::U16((0..n).map(|_| rng.gen()).collect()),
            PixelType::S16 => Pixels::S16((0..n).map(|_| rng.gen()).collect()),
            PixelType::S32 => Pixels::S32((0..n).map(|_| rng.gen()).collect()),
            PixelType::U32 => Pixels::U32((0..n).map(|_| rng.gen()).collect()),
            PixelType::F32 => Pixels::F32((0..n).map(|_| rng.gen_range(-1024.0f32..1024.0)).collect()),
        };
        Image { width, height, format, pixels }
    }

    pub fn descriptor(&self) -> DataKind {
        DataKind::image(self.width, self.height, self.format)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayItems {
    Values(Vec<i64>),
    Coords(Vec<(u32, u32)>),
}

impl ArrayItems {
    pub fn len(&self) -> usize {
        match self {
            ArrayItems::Values(v) => v.len(),
            ArrayItems::Coords(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Runtime payload of one data object.
#[derive(Clone, Debug, PartialEq)]
pub enum Buffer {
    Image(Image),
    Scalar(PixelType, Value),
    Array { element: ElementKind, capacity: usize, items: ArrayItems },
    Matrix { rows: usize, cols: usize, format: PixelType, data: Vec<f64> },
    Distribution { bins: usize, offset: i64, range: u64, counts: Vec<u32> },
}

impl Buffer {
    /// True when the payload shape matches the descriptor exactly.
    pub fn matches(&self, kind: &DataKind) -> bool {
        match (self, kind) {
            (Buffer::Image(img), DataKind::Image { width, height, format }) => {
                img.width == *width && img.height == *height && img.format == *format && img.is_consistent()
            }
            (Buffer::Scalar(t, _), DataKind::Scalar { format, .. }) => t == format,
            (Buffer::Array { element, capacity, items }, DataKind::Array { capacity: c, element: e }) => {
                element == e && capacity == c && items.len() <= *capacity
            }
            (Buffer::Matrix { rows, cols, format, data }, DataKind::Matrix { rows: r, cols: c, format: f, .. }) => {
                rows == r && cols == c && format == f && data.len() == rows * cols
            }
            (
                Buffer::Distribution { bins, offset, range, counts },
                DataKind::Distribution { bins: b, offset: o, range: r },
            ) => bins == b && offset == o && range == r && counts.len() == *bins,
            _ => false,
        }
    }

    /// Payload implied by a descriptor alone: constant scalars and matrices.
    pub fn from_constant(kind: &DataKind) -> Option<Buffer> {
        match kind {
            DataKind::Scalar { format, value: Some(v) } => Some(Buffer::Scalar(*format, *v)),
            DataKind::Matrix { rows, cols, format, data } => {
                Some(Buffer::Matrix { rows: *rows, cols: *cols, format: *format, data: data.clone() })
            }
            _ => None,
        }
    }

    pub fn as_image(&self) -> Option<&Image> {
        match self {
            Buffer::Image(i) => Some(i),
            _ => None,
        }
    }

    /// Bit-level equality (F32 compared by bit pattern).
    pub fn bit_eq(&self, other: &Buffer) -> bool {
        match (self, other) {
            (Buffer::Image(a), Buffer::Image(b)) => match (&a.pixels, &b.pixels) {
                (Pixels::F32(x), Pixels::F32(y)) => {
                    a.width == b.width
                        && a.height == b.height
                        && x.len() == y.len()
                        && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits())
                }
                _ => a == b,
            },
            (Buffer::Scalar(t, a), Buffer::Scalar(u, b)) => t == u && a.bit_eq(*b),
            _ => self == other,
        }
    }
}
