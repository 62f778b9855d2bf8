//! Blocklet templates: the 2n-port encoded Bell pair of a code and its
//! Pauli webs (stabilizer cups, caps, logical membranes).

use crate::codes::{Pauli, StabilizerCode};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Side {
    Top,
    Bottom,
}

/// One port of a blocklet: side plus qubit index within the code block.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct PortLabel {
    pub side: Side,
    pub index: u8,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum WebKind {
    /// Stabilizer web on the top ports only.
    Cup { stabilizer: u8 },
    /// Stabilizer web on the bottom ports only.
    Cap { stabilizer: u8 },
    /// Logical correlator mirrored on top and bottom ports.
    MembraneX { logical: u8 },
    MembraneZ { logical: u8 },
}

/// A Pauli web of one blocklet, stored as port-indexed (x, z) masks.
///
/// Masks are little-endian over port index; `u32` leaves headroom for any
/// registry code (n <= 16).
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Web {
    pub kind: WebKind,
    pub top_x: u32,
    pub top_z: u32,
    pub bot_x: u32,
    pub bot_z: u32,
}

impl Web {
    pub fn label(&self, port: PortLabel) -> Pauli {
        let (xm, zm) = match port.side {
            Side::Top => (self.top_x, self.top_z),
            Side::Bottom => (self.bot_x, self.bot_z),
        };
        Pauli::from_bits((xm >> port.index) & 1 == 1, (zm >> port.index) & 1 == 1)
    }

    /// Symplectic anticommutation over all 2n ports.
    pub fn anticommutes(&self, other: &Web) -> bool {
        let cross = |ax: u32, az: u32, bx: u32, bz: u32| -> bool {
            (((ax & bz).count_ones() + (az & bx).count_ones()) % 2) == 1
        };
        cross(self.top_x, self.top_z, other.top_x, other.top_z)
            ^ cross(self.bot_x, self.bot_z, other.bot_x, other.bot_z)
    }

    pub fn is_pure_basis(&self) -> bool {
        (self.top_x | self.bot_x) == 0 || (self.top_z | self.bot_z) == 0
    }
}

/// All 2n Pauli webs of a code's blocklet: (n-k) cups, (n-k) caps and 2k
/// membranes, in a stable order (cups, caps, then X/Z membrane per logical).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockletTemplate {
    pub code: StabilizerCode,
    pub webs: Vec<Web>,
}

impl BlockletTemplate {
    pub fn n(&self) -> usize {
        self.code.n
    }

    pub fn web_count(&self) -> usize {
        self.webs.len()
    }

    pub fn cup_index(&self, stabilizer: usize) -> usize {
        stabilizer
    }

    pub fn cap_index(&self, stabilizer: usize) -> usize {
        (self.code.n - self.code.k) + stabilizer
    }

    pub fn mem_x_index(&self, logical: usize) -> usize {
        2 * (self.code.n - self.code.k) + 2 * logical
    }

    pub fn mem_z_index(&self, logical: usize) -> usize {
        2 * (self.code.n - self.code.k) + 2 * logical + 1
    }
}

pub fn build_template(code: &StabilizerCode) -> BlockletTemplate {
    let mut webs = Vec::with_capacity(2 * code.n);
    for (si, s) in code.stabilizers.iter().enumerate() {
        webs.push(Web {
            kind: WebKind::Cup { stabilizer: si as u8 },
            top_x: mask(&s.x),
            top_z: mask(&s.z),
            bot_x: 0,
            bot_z: 0,
        });
    }
    for (si, s) in code.stabilizers.iter().enumerate() {
        webs.push(Web {
            kind: WebKind::Cap { stabilizer: si as u8 },
            top_x: 0,
            top_z: 0,
            bot_x: mask(&s.x),
            bot_z: mask(&s.z),
        });
    }
    for a in 0..code.k {
        let lx = &code.logicals_x[a];
        webs.push(Web {
            kind: WebKind::MembraneX { logical: a as u8 },
            top_x: mask(&lx.x),
            top_z: mask(&lx.z),
            bot_x: mask(&lx.x),
            bot_z: mask(&lx.z),
        });
        let lz = &code.logicals_z[a];
        webs.push(Web {
            kind: WebKind::MembraneZ { logical: a as u8 },
            top_x: mask(&lz.x),
            top_z: mask(&lz.z),
            bot_x: mask(&lz.x),
            bot_z: mask(&lz.z),
        });
    }
    BlockletTemplate { code: code.clone(), webs }
}

fn mask(bits: &crate::gf2::BitVec) -> u32 {
    let mut m = 0u32;
    for i in bits.iter_ones() {
        m |= 1 << i;
    }
    m
}

/// True iff the webs form the stabilizer group of an encoded Bell pair plus
/// its logical correlators: all pairs commute (the X/Z membranes of one
/// logical are exempt from the requirement) and the 2n webs are independent
/// as symplectic vectors.
pub fn web_group_check(template: &BlockletTemplate) -> bool {
    let webs = &template.webs;
    for a in 0..webs.len() {
        for b in (a + 1)..webs.len() {
            let exempt = matches!(
                (webs[a].kind, webs[b].kind),
                (WebKind::MembraneX { logical: la }, WebKind::MembraneZ { logical: lb }) |
                (WebKind::MembraneZ { logical: la }, WebKind::MembraneX { logical: lb })
                    if la == lb
            );
            if !exempt && webs[a].anticommutes(&webs[b]) {
                return false;
            }
        }
    }
    // independence over (top_x | top_z | bot_x | bot_z) as a 4n-bit vector
    let n = template.n();
    let rows: Vec<crate::gf2::BitVec> = webs
        .iter()
        .map(|w| {
            let mut v = crate::gf2::BitVec::zeros(4 * n);
            for i in 0..n {
                if (w.top_x >> i) & 1 == 1 {
                    v.set(i, true);
                }
                if (w.top_z >> i) & 1 == 1 {
                    v.set(n + i, true);
                }
                if (w.bot_x >> i) & 1 == 1 {
                    v.set(2 * n + i, true);
                }
                if (w.bot_z >> i) & 1 == 1 {
                    v.set(3 * n + i, true);
                }
            }
            v
        })
        .collect();
    crate::gf2::BitMatrix::from_rows(&rows).rank() == webs.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::builtin;

    #[test]
    fn web_counts() {
        assert_eq!(build_template(&builtin("[4,1,2]").unwrap()).web_count(), 8);
        assert_eq!(build_template(&builtin("[5,1,3]").unwrap()).web_count(), 10);
        assert_eq!(build_template(&builtin("[4,2,2]").unwrap()).web_count(), 8);
    }

    #[test]
    fn group_check_builtins() {
        for name in crate::codes::builtin_names() {
            let t = build_template(&builtin(name).unwrap());
            assert!(web_group_check(&t), "group check failed for {}", name);
        }
    }

    #[test]
    fn group_check_detects_dropped_label() {
        let mut t = build_template(&builtin("[4,1,2]").unwrap());
        // drop one label from the first cup
        let first = t.webs[0].top_x | t.webs[0].top_z;
        let bit = first.trailing_zeros();
        t.webs[0].top_x &= !(1 << bit);
        t.webs[0].top_z &= !(1 << bit);
        assert!(!web_group_check(&t));
    }

    #[test]
    fn css_webs_pure_mixed_for_five_qubit() {
        let css = build_template(&builtin("[7,1,3]").unwrap());
        assert!(css.webs.iter().all(|w| w.is_pure_basis()));
        let five = build_template(&builtin("[5,1,3]").unwrap());
        assert!(five.webs.iter().take(8).all(|w| !w.is_pure_basis()));
    }

    #[test]
    fn membrane_mirroring() {
        let t = build_template(&builtin("[4,1,2]").unwrap());
        let mx = &t.webs[t.mem_x_index(0)];
        assert_eq!(mx.top_x, mx.bot_x);
        assert_eq!(mx.top_x, 0b0101); // X on qubits 0 and 2
        let mz = &t.webs[t.mem_z_index(0)];
        assert_eq!(mz.top_z, 0b0011); // Z on qubits 0 and 1
    }
}
