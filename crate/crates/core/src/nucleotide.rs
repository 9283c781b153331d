//! Nucleotide alphabet helpers: strict bases, IUPAC ambiguity codes and the
//! purine/pyrimidine split used for transition/transversion classification.

pub const BASES: [u8; 4] = *b"ACGT";
pub const GAP: u8 = b'-';

/// Ambiguity codes accepted in raw input (uppercase).
pub const AMBIGUITY_CODES: [u8; 11] = *b"RYSWKMBDHVN";

/// Index of a strict base in `ACGT` order.
#[inline]
pub fn base_index(b: u8) -> Option<usize> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

/// Bases a symbol may stand for, in lexicographic order.
pub fn compatible_bases(b: u8) -> Option<&'static [u8]> {
    Some(match b {
        b'A' => b"A",
        b'C' => b"C",
        b'G' => b"G",
        b'T' => b"T",
        b'R' => b"AG",
        b'Y' => b"CT",
        b'S' => b"CG",
        b'W' => b"AT",
        b'K' => b"GT",
        b'M' => b"AC",
        b'B' => b"CGT",
        b'D' => b"AGT",
        b'H' => b"ACT",
        b'V' => b"ACG",
        b'N' => b"ACGT",
        _ => return None,
    })
}

#[inline]
pub fn is_base(b: u8) -> bool {
    base_index(b).is_some()
}

#[inline]
pub fn is_ambiguity(b: u8) -> bool {
    AMBIGUITY_CODES.contains(&b)
}

/// Residue allowed in an unaligned record.
#[inline]
pub fn is_residue(b: u8) -> bool {
    is_base(b) || is_ambiguity(b)
}

#[inline]
pub fn is_purine(b: u8) -> bool {
    matches!(b, b'A' | b'G')
}

/// A↔G or C↔T. Callers must pass two distinct strict bases.
#[inline]
pub fn is_transition(a: u8, b: u8) -> bool {
    is_purine(a) == is_purine(b)
}
