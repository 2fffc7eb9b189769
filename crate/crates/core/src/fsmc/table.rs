use std::fmt;

use super::dsl::{state_label, State, StateDiagram};

/// Row index `s1<<2 | s0<<1 | a`.
pub fn row_index(state: State, a: bool) -> usize {
    ((state as usize) << 1) | a as usize
}

/// Next-state table. `rows[i]` is the next state for row index `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransitionTable {
    pub rows: [State; 8],
}

impl TransitionTable {
    pub fn from_fn(f: impl Fn(State, bool) -> State) -> Self {
        let mut rows = [0; 8];
        for (i, r) in rows.iter_mut().enumerate() {
            *r = f((i >> 1) as State, i & 1 == 1);
        }
        TransitionTable { rows }
    }

    pub fn next(&self, state: State, a: bool) -> State {
        self.rows[row_index(state, a)]
    }

    /// On-set of next-state bit `bit` (1 = N1, 0 = N0) as a minterm mask.
    pub fn onset(&self, bit: u32) -> u8 {
        let mut m = 0u8;
        for (i, r) in self.rows.iter().enumerate() {
            if (r >> bit) & 1 == 1 {
                m |= 1 << i;
            }
        }
        m
    }
}

pub fn to_table(d: &StateDiagram) -> TransitionTable {
    TransitionTable::from_fn(|s, a| d.next(s, a))
}

impl fmt::Display for TransitionTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "S1 S0 A | N1 N0")?;
        for (i, n) in self.rows.iter().enumerate() {
            let s = state_label((i >> 1) as State);
            let (s1, s0) = (&s[0..1], &s[1..2]);
            let n = state_label(*n);
            writeln!(f, "{s1}  {s0}  {} | {}  {}", i & 1, &n[0..1], &n[1..2])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsmc::dsl::parse_fsm;

    #[test]
    fn counter_rows() {
        let d = parse_fsm(include_str!("../../programs/counter.fsm")).unwrap();
        let t = to_table(&d);
        for s in 0..4 {
            assert_eq!(t.next(s, true), (s + 1) % 4);
            assert_eq!(t.next(s, false), 0);
        }
    }

    #[test]
    fn phase_columns() {
        let t = to_table(&parse_fsm(include_str!("../../programs/phase.fsm")).unwrap());
        for i in 0..8 {
            let (s0, a) = ((i >> 1) & 1 == 1, i & 1 == 1);
            let n = t.rows[i];
            assert_eq!(n & 1 == 1, !s0);
            assert_eq!(n >> 1 == 1, s0 == a);
        }
    }

    #[test]
    fn display_has_eight_rows() {
        let t = TransitionTable::from_fn(|s, _| s);
        assert_eq!(t.to_string().lines().count(), 9);
    }
}
