use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CompressionError;

/// The nine BΔI encodings, in table order.
///
/// Table order doubles as the tie-break when two applicable encodings have the
/// same compressed size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Encoding {
    Zeros,
    RepValues,
    Base8Delta1,
    Base8Delta2,
    Base8Delta4,
    Base4Delta1,
    Base4Delta2,
    Base2Delta1,
    NoCompr,
}

impl Encoding {
    pub const ALL: [Encoding; 9] = [
        Encoding::Zeros,
        Encoding::RepValues,
        Encoding::Base8Delta1,
        Encoding::Base8Delta2,
        Encoding::Base8Delta4,
        Encoding::Base4Delta1,
        Encoding::Base4Delta2,
        Encoding::Base2Delta1,
        Encoding::NoCompr,
    ];

    /// The six base+delta encodings, in table order.
    pub const BASE_DELTA: [Encoding; 6] = [
        Encoding::Base8Delta1,
        Encoding::Base8Delta2,
        Encoding::Base8Delta4,
        Encoding::Base4Delta1,
        Encoding::Base4Delta2,
        Encoding::Base2Delta1,
    ];

    /// 4-bit code stored alongside every tag.
    pub fn code(self) -> u8 {
        match self {
            Encoding::Zeros => 0b0000,
            Encoding::RepValues => 0b0001,
            Encoding::Base8Delta1 => 0b0010,
            Encoding::Base8Delta2 => 0b0011,
            Encoding::Base8Delta4 => 0b0100,
            Encoding::Base4Delta1 => 0b0101,
            Encoding::Base4Delta2 => 0b0110,
            Encoding::Base2Delta1 => 0b0111,
            Encoding::NoCompr => 0b1111,
        }
    }

    pub fn from_code(code: u8) -> Option<Encoding> {
        Encoding::ALL.into_iter().find(|e| e.code() == code)
    }

    /// Element (base) width in bytes. `None` for NoCompr.
    pub fn base_width(self) -> Option<usize> {
        match self {
            Encoding::Zeros => Some(1),
            Encoding::RepValues => Some(8),
            Encoding::Base8Delta1 | Encoding::Base8Delta2 | Encoding::Base8Delta4 => Some(8),
            Encoding::Base4Delta1 | Encoding::Base4Delta2 => Some(4),
            Encoding::Base2Delta1 => Some(2),
            Encoding::NoCompr => None,
        }
    }

    /// Delta width in bytes. `None` for NoCompr.
    pub fn delta_width(self) -> Option<usize> {
        match self {
            Encoding::Zeros | Encoding::RepValues => Some(0),
            Encoding::Base8Delta1 | Encoding::Base4Delta1 | Encoding::Base2Delta1 => Some(1),
            Encoding::Base8Delta2 | Encoding::Base4Delta2 => Some(2),
            Encoding::Base8Delta4 => Some(4),
            Encoding::NoCompr => None,
        }
    }

    /// Base+delta encoding for an element width / delta width pair.
    pub fn for_unit(base_width: usize, delta_width: usize) -> Option<Encoding> {
        Encoding::BASE_DELTA
            .into_iter()
            .find(|e| e.base_width() == Some(base_width) && e.delta_width() == Some(delta_width))
    }

    pub fn is_base_delta(self) -> bool {
        Encoding::BASE_DELTA.contains(&self)
    }

    /// Compressed size in bytes for a line of `line_size` bytes.
    ///
    /// Base+delta sizes are one base plus one delta per element; the
    /// zero-base mask is not charged.
    pub fn compressed_size(self, line_size: usize) -> usize {
        match self {
            Encoding::Zeros => 1,
            Encoding::RepValues => 8,
            Encoding::NoCompr => line_size,
            _ => {
                let k = self.base_width().unwrap();
                let d = self.delta_width().unwrap();
                k + (line_size / k) * d
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Encoding::Zeros => "Zeros",
            Encoding::RepValues => "RepValues",
            Encoding::Base8Delta1 => "B8D1",
            Encoding::Base8Delta2 => "B8D2",
            Encoding::Base8Delta4 => "B8D4",
            Encoding::Base4Delta1 => "B4D1",
            Encoding::Base4Delta2 => "B4D2",
            Encoding::Base2Delta1 => "B2D1",
            Encoding::NoCompr => "NoCompr",
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Encoding {
    type Err = CompressionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Encoding::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| CompressionError::UnknownEncoding(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_match_table() {
        let expected = [0b0000, 0b0001, 0b0010, 0b0011, 0b0100, 0b0101, 0b0110, 0b0111, 0b1111];
        for (e, code) in Encoding::ALL.iter().zip(expected) {
            assert_eq!(e.code(), code, "{e}");
            assert_eq!(Encoding::from_code(code), Some(*e));
        }
        assert_eq!(Encoding::from_code(0b1000), None);
    }

    #[test]
    fn sizes_match_table() {
        let table = [
            (Encoding::Zeros, 1, 1),
            (Encoding::RepValues, 8, 8),
            (Encoding::Base8Delta1, 12, 16),
            (Encoding::Base8Delta2, 16, 24),
            (Encoding::Base8Delta4, 24, 40),
            (Encoding::Base4Delta1, 12, 20),
            (Encoding::Base4Delta2, 20, 36),
            (Encoding::Base2Delta1, 18, 34),
            (Encoding::NoCompr, 32, 64),
        ];
        for (e, s32, s64) in table {
            assert_eq!(e.compressed_size(32), s32, "{e} @32");
            assert_eq!(e.compressed_size(64), s64, "{e} @64");
        }
    }

    #[test]
    fn names_round_trip() {
        for e in Encoding::ALL {
            assert_eq!(e.name().parse::<Encoding>().unwrap(), e);
        }
        assert!("B16D1".parse::<Encoding>().is_err());
    }
}
