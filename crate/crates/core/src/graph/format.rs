use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Numeric element type of a pixel channel, scalar, or matrix coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PixelType {
    U8,
    U16,
    S16,
    S32,
    U32,
    F32,
}

impl PixelType {
    pub const ALL: [PixelType; 6] = [
        PixelType::U8,
        PixelType::U16,
        PixelType::S16,
        PixelType::S32,
        PixelType::U32,
        PixelType::F32,
    ];

    pub fn is_float(self) -> bool {
        self == PixelType::F32
    }

    pub fn is_signed(self) -> bool {
        matches!(self, PixelType::S16 | PixelType::S32 | PixelType::F32)
    }

    /// Storage width in bits.
    pub fn bits(self) -> u32 {
        match self {
            PixelType::U8 => 8,
            PixelType::U16 | PixelType::S16 => 16,
            PixelType::S32 | PixelType::U32 | PixelType::F32 => 32,
        }
    }

    pub fn bytes(self) -> usize {
        self.bits() as usize / 8
    }

    /// Inclusive integer range; `None` for floating point.
    pub fn int_range(self) -> Option<(i64, i64)> {
        match self {
            PixelType::U8 => Some((0, u8::MAX as i64)),
            PixelType::U16 => Some((0, u16::MAX as i64)),
            PixelType::S16 => Some((i16::MIN as i64, i16::MAX as i64)),
            PixelType::S32 => Some((i32::MIN as i64, i32::MAX as i64)),
            PixelType::U32 => Some((0, u32::MAX as i64)),
            PixelType::F32 => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PixelType::U8 => "U8",
            PixelType::U16 => "U16",
            PixelType::S16 => "S16",
            PixelType::S32 => "S32",
            PixelType::U32 => "U32",
            PixelType::F32 => "F32",
        }
    }
}

impl fmt::Display for PixelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PixelType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PixelType::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown pixel type `{s}`"))
    }
}

/// Image format tag.
///
/// `U8`..`F32` are single channel. `Rgb` stores three interleaved U8 channels.
/// `Uyvy` is 4:2:2 packed: each pair of pixels shares four bytes `U Y0 V Y1`.
/// `Unresolved` is only legal on virtual images before verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ImageFormat {
    #[serde(rename = "U8")]
    U8,
    #[serde(rename = "U16")]
    U16,
    #[serde(rename = "S16")]
    S16,
    #[serde(rename = "S32")]
    S32,
    #[serde(rename = "U32")]
    U32,
    #[serde(rename = "F32")]
    F32,
    #[serde(rename = "RGB")]
    Rgb,
    #[serde(rename = "UYVY")]
    Uyvy,
    #[serde(rename = "UNRESOLVED")]
    Unresolved,
}

impl ImageFormat {
    pub const CONCRETE: [ImageFormat; 8] = [
        ImageFormat::U8,
        ImageFormat::U16,
        ImageFormat::S16,
        ImageFormat::S32,
        ImageFormat::U32,
        ImageFormat::F32,
        ImageFormat::Rgb,
        ImageFormat::Uyvy,
    ];

    pub fn is_resolved(self) -> bool {
        self != ImageFormat::Unresolved
    }

    /// Number of logical channels a kernel can address. UYVY exposes Y, U and V.
    pub fn channels(self) -> usize {
        match self {
            ImageFormat::Rgb | ImageFormat::Uyvy => 3,
            ImageFormat::Unresolved => 0,
            _ => 1,
        }
    }

    /// Element type of one channel.
    pub fn channel_type(self) -> Option<PixelType> {
        match self {
            ImageFormat::U8 | ImageFormat::Rgb | ImageFormat::Uyvy => Some(PixelType::U8),
            ImageFormat::U16 => Some(PixelType::U16),
            ImageFormat::S16 => Some(PixelType::S16),
            ImageFormat::S32 => Some(PixelType::S32),
            ImageFormat::U32 => Some(PixelType::U32),
            ImageFormat::F32 => Some(PixelType::F32),
            ImageFormat::Unresolved => None,
        }
    }

    /// Single-channel format holding values of `t`.
    pub fn single(t: PixelType) -> ImageFormat {
        match t {
            PixelType::U8 => ImageFormat::U8,
            PixelType::U16 => ImageFormat::U16,
            PixelType::S16 => ImageFormat::S16,
            PixelType::S32 => ImageFormat::S32,
            PixelType::U32 => ImageFormat::U32,
            PixelType::F32 => ImageFormat::F32,
        }
    }

    pub fn is_single_channel(self) -> bool {
        self.channels() == 1
    }

    /// Bytes used by one row of `width` pixels.
    pub fn row_bytes(self, width: u32) -> usize {
        let w = width as usize;
        match self {
            ImageFormat::Rgb => 3 * w,
            ImageFormat::Uyvy => 2 * w,
            ImageFormat::Unresolved => 0,
            f => f.channel_type().map(|t| t.bytes() * w).unwrap_or(0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ImageFormat::U8 => "U8",
            ImageFormat::U16 => "U16",
            ImageFormat::S16 => "S16",
            ImageFormat::S32 => "S32",
            ImageFormat::U32 => "U32",
            ImageFormat::F32 => "F32",
            ImageFormat::Rgb => "RGB",
            ImageFormat::Uyvy => "UYVY",
            ImageFormat::Unresolved => "UNRESOLVED",
        }
    }

    /// Numeric code used by the raw image container.
    pub fn code(self) -> u32 {
        match self {
            ImageFormat::U8 => 1,
            ImageFormat::U16 => 2,
            ImageFormat::S16 => 3,
            ImageFormat::S32 => 4,
            ImageFormat::U32 => 5,
            ImageFormat::F32 => 6,
            ImageFormat::Rgb => 7,
            ImageFormat::Uyvy => 8,
            ImageFormat::Unresolved => 0,
        }
    }

    pub fn from_code(code: u32) -> Option<ImageFormat> {
        ImageFormat::CONCRETE.into_iter().find(|f| f.code() == code)
    }
}

impl fmt::Display for ImageFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImageFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ImageFormat::CONCRETE
            .into_iter()
            .chain([ImageFormat::Unresolved])
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown image format `{s}`"))
    }
}

/// Element kind of an array data object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ElementKind {
    U8,
    U32,
    S32,
    /// `(x, y)` pixel coordinate.
    Coordinate,
}

impl ElementKind {
    pub fn value_type(self) -> Option<PixelType> {
        match self {
            ElementKind::U8 => Some(PixelType::U8),
            ElementKind::U32 => Some(PixelType::U32),
            ElementKind::S32 => Some(PixelType::S32),
            ElementKind::Coordinate => None,
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ElementKind::U8 => "U8",
            ElementKind::U32 => "U32",
            ElementKind::S32 => "S32",
            ElementKind::Coordinate => "COORDINATE",
        };
        f.write_str(s)
    }
}
