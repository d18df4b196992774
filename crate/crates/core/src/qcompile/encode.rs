//! String encoding of circuits and transition tables over `{1,#,2,3,4}`.
//!
//! A placement `(k, G)` is written `1^k#⟨G⟩`; placements of one circuit are
//! joined by `##` and the circuits of a table by `###`.

use super::gates::{Circuit, Gate, Placement};
use crate::{Error, Result};

pub fn encode_circuit(c: &Circuit) -> String {
    let mut out = String::new();
    for (i, p) in c.placements.iter().enumerate() {
        if i > 0 {
            out.push_str("##");
        }
        out.extend(std::iter::repeat_n('1', p.offset));
        out.push('#');
        out.push(p.gate.code());
    }
    out
}

pub fn encode_rows(rows: &[Circuit]) -> String {
    rows.iter().map(encode_circuit).collect::<Vec<_>>().join("###")
}

/// Parses a single circuit (no row separators allowed).
pub fn decode_circuit(text: &str) -> Result<Vec<Placement>> {
    let mut rows = decode_rows(text)?;
    if rows.len() != 1 {
        return Err(perr(text.find("###").unwrap_or(0), "row separator inside a circuit"));
    }
    Ok(rows.remove(0))
}

fn perr(offset: usize, message: &str) -> Error {
    Error::Parse { offset, message: message.to_string() }
}

/// Splits a table into rows of placements.
///
/// A run of `#` after a gate code is read as: 2, a placement separator;
/// 3 followed by a gate code, a separator plus an offset-0 placement;
/// otherwise `3m` or `3m+1` marks `m` row separators, the extra `#` opening
/// an offset-0 placement. The I gate (code 1) right after a separator is
/// therefore only reachable with a nonzero offset.
pub fn decode_rows(text: &str) -> Result<Vec<Vec<Placement>>> {
    let b = text.as_bytes();
    if let Some(i) = b.iter().position(|c| !matches!(c, b'1' | b'#' | b'2' | b'3' | b'4')) {
        let msg = if i > 0 && b[i - 1] == b'#' { "unknown gate code" } else { "character outside {1,#,2,3,4}" };
        return Err(perr(i, msg));
    }
    let run = |i: usize| b[i..].iter().take_while(|&&c| c == b'#').count();
    let mut rows: Vec<Vec<Placement>> = vec![Vec::new()];
    let mut i = 0;
    // Leading separators before the first placement.
    let n = run(0);
    if n > 0 {
        match n % 3 {
            0 => {
                rows.extend((0..n / 3).map(|_| Vec::new()));
                i = n;
            }
            1 => {
                rows.extend((0..n / 3).map(|_| Vec::new()));
                i = n - 1;
            }
            _ => return Err(perr(n - 1, "dangling separator")),
        }
    }
    if i == b.len() {
        return Ok(rows);
    }
    loop {
        // Placement: 1^k # code.
        let start = i;
        while i < b.len() && b[i] == b'1' {
            i += 1;
        }
        let k = i - start;
        if i >= b.len() {
            return Err(perr(i, "unexpected end of placement"));
        }
        if b[i] != b'#' {
            return Err(perr(i, "expected '#'"));
        }
        i += 1;
        if i >= b.len() {
            return Err(perr(i, "missing gate code"));
        }
        let gate = Gate::from_code(b[i] as char).ok_or_else(|| perr(i, "unknown gate code"))?;
        rows.last_mut().expect("row").push(Placement { offset: k, gate });
        i += 1;
        if i == b.len() {
            return Ok(rows);
        }
        let n = run(i);
        let after = b.get(i + n).copied();
        match (n, after) {
            (0, _) => return Err(perr(i, "expected separator")),
            (2, Some(b'1')) => i += 2,
            (3, Some(b'2' | b'3' | b'4')) => i += 2,
            (n, after) if n % 3 == 0 => {
                rows.extend((0..n / 3).map(|_| Vec::new()));
                i += n;
                match after {
                    None => return Ok(rows),
                    Some(b'1') => {}
                    Some(_) => return Err(perr(i, "expected placement")),
                }
            }
            (n, Some(_)) if n % 3 == 1 && n > 1 => {
                rows.extend((0..n / 3).map(|_| Vec::new()));
                i += n - 1;
            }
            _ => return Err(perr(i, "dangling separator")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn circ(ps: &[(usize, Gate)]) -> Circuit {
        let mut c = Circuit::new(8);
        for &(k, g) in ps {
            c.push(k, g);
        }
        c
    }

    #[test]
    fn literal_encodings() {
        assert_eq!(encode_circuit(&circ(&[(2, Gate::H)])), "11#3");
        assert_eq!(encode_circuit(&circ(&[])), "");
        assert_eq!(encode_circuit(&circ(&[(1, Gate::Cnot), (3, Gate::T)])), "1#2##111#4");
    }

    #[test]
    fn unknown_code_offset() {
        assert_eq!(
            decode_rows("1#9"),
            Err(Error::Parse { offset: 2, message: "unknown gate code".into() })
        );
        assert!(decode_rows("1#3##").is_err());
        assert!(decode_rows("1#3#").is_err());
        assert!(decode_rows("1#").is_err());
        assert!(decode_rows("#####").is_err());
    }

    #[test]
    fn offset_zero_after_separator() {
        let rows = decode_rows("1#3###3").unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0][1], Placement { offset: 0, gate: Gate::H });
        let rows = decode_rows("1#3####3").unwrap();
        assert_eq!(rows.len(), 2);
        let rows = decode_rows("#4######").unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[1].is_empty() && rows[2].is_empty());
    }

    fn arb_circuit() -> impl Strategy<Value = Circuit> {
        let gate = prop_oneof![Just(Gate::Cnot), Just(Gate::H), Just(Gate::T)];
        prop::collection::vec((0usize..5, gate), 0..6).prop_map(|ps| circ(&ps))
    }

    proptest! {
        #[test]
        fn tables_round_trip(rows in prop::collection::vec(arb_circuit(), 1..6)) {
            let text = encode_rows(&rows);
            let back = decode_rows(&text).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (r, b) in rows.iter().zip(&back) {
                prop_assert_eq!(&r.placements, b);
            }
            let again: Vec<Circuit> = back.into_iter().map(|p| Circuit { qubits: 8, placements: p }).collect();
            prop_assert_eq!(encode_rows(&again), text);
        }
    }
}
