//! Fusion networks: blocklet instances, fusions carrying outcome bits,
//! check and logical-membrane rows, and the concatenation-block tree.
//!
//! Rows are kept in two forms: a web composition (which blocklet webs
//! multiply into the row) and the derived outcome-bit list. Compositions are
//! the source of truth during construction; bit lists are regenerated after
//! every transformation and label matching is asserted on every fusion.

use crate::blocklet::{BlockletTemplate, PortLabel, Side};
use crate::codes::Pauli;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub type BlockletId = u32;
pub type FusionId = u32;
pub type BitId = u32;

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("label mismatch on fusion {fusion}: {a:?} vs {b:?}")]
    LabelMismatch { fusion: FusionId, a: Pauli, b: Pauli },
    #[error("row has a label on unfused port (blocklet {blocklet}, {port:?})")]
    UnfusedSupport { blocklet: BlockletId, port: PortLabel },
    #[error("{0}")]
    Build(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockletInfo {
    pub template: u16,
    pub layer: u32,
    pub pos: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fusion {
    /// Endpoint whose port side is `Bottom`; errors on this fusion are
    /// attributed to this blocklet by the hierarchical decoder.
    pub bottom: (BlockletId, u8),
    /// Endpoint whose port side is `Top`.
    pub top: (BlockletId, u8),
    pub linked: bool,
}

impl Fusion {
    pub fn bit_x(id: FusionId) -> BitId {
        2 * id
    }

    pub fn bit_z(id: FusionId) -> BitId {
        2 * id + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckKind {
    Fundamental,
    Product,
}

/// One parity-check row over outcome bits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckRow {
    pub bits: Vec<BitId>,
    pub kind: CheckKind,
    /// 0 = created at foliation, s = created at concatenation step s.
    pub created_step: u8,
    /// Hierarchy level; 1 = created in the final concatenation step.
    pub level: u8,
    /// Web composition; cleared after collapse.
    pub comp: Vec<(BlockletId, u32)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogicalRow {
    pub bits: Vec<BitId>,
    pub comp: Vec<(BlockletId, u32)>,
}

/// Transversally fused blocklet pair; `first`'s bottom ports are fused to
/// `second`'s top ports, one fusion per port.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransversalPair {
    pub first: BlockletId,
    pub second: BlockletId,
    pub fusions: Vec<FusionId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChildRef {
    Blocklet(BlockletId),
    Node(u32),
}

/// A concatenation block: one replaced blocklet, its children and the
/// encoded-web bookkeeping in terms of child webs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockNode {
    pub step: u8,
    pub old_layer: u32,
    pub old_pos: u32,
    /// Top-layer children first (port order), then bottom-layer children.
    pub children: Vec<ChildRef>,
    pub top_len: u16,
    /// Encoded web compositions indexed `old_web * k_out + variant`:
    /// list of (child slot, child web index).
    pub enc_webs: Vec<Vec<(u16, u16)>>,
    pub k_out: u16,
    /// Product checks of this block as (child slot, child web index) lists.
    pub products: Vec<Vec<(u16, u16)>>,
    /// Template index of the replaced blocklet (the node's own code).
    pub template: u16,
}

/// Fund-check bookkeeping for a transversal junction between two tree
/// members: `a`'s caps meet `b`'s cups, one check per stabilizer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeJunction {
    pub step: u8,
    pub a: ChildRef,
    pub b: ChildRef,
    pub template: u16,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BlockTree {
    pub nodes: Vec<BlockNode>,
    /// Base-layer ring members in layer order.
    pub ring: Vec<ChildRef>,
    /// Base-ring junctions (member t bottom to member t+1 top).
    pub ring_junctions: Vec<TreeJunction>,
    /// Pair junctions created at concatenation steps.
    pub junctions: Vec<TreeJunction>,
    /// True once collapse has invalidated web compositions.
    pub structural_only: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum LinkPattern {
    /// Link every fusion except those with `id % 4 == offset`.
    SkipFourth { offset: u8 },
    Explicit(Vec<FusionId>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Code stack in application order: base code first, then each
    /// concatenation step's outer code.
    pub code_stack: Vec<String>,
    pub level: u32,
    pub base_layers: u32,
    pub periodic: bool,
    pub collapsed: bool,
    pub linking: Option<LinkPattern>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FusionNetwork {
    pub templates: Vec<BlockletTemplate>,
    pub blocklets: Vec<BlockletInfo>,
    pub fusions: Vec<Fusion>,
    pub checks: Vec<CheckRow>,
    pub logicals: Vec<LogicalRow>,
    pub pairs: Vec<TransversalPair>,
    pub tree: BlockTree,
    pub params: NetworkParams,
    pub layer_count: u32,
}

impl FusionNetwork {
    pub fn bit_count(&self) -> usize {
        2 * self.fusions.len()
    }

    pub fn template_of(&self, b: BlockletId) -> &BlockletTemplate {
        &self.templates[self.blocklets[b as usize].template as usize]
    }

    /// port -> fusion lookup table: [blocklet][side][port] -> fusion id.
    pub fn port_map(&self) -> PortMap {
        let mut map = PortMap {
            top: vec![Vec::new(); self.blocklets.len()],
            bottom: vec![Vec::new(); self.blocklets.len()],
        };
        for (b, info) in self.blocklets.iter().enumerate() {
            let n = self.templates[info.template as usize].n();
            map.top[b] = vec![None; n];
            map.bottom[b] = vec![None; n];
        }
        for (f, fusion) in self.fusions.iter().enumerate() {
            map.bottom[fusion.bottom.0 as usize][fusion.bottom.1 as usize] = Some(f as FusionId);
            map.top[fusion.top.0 as usize][fusion.top.1 as usize] = Some(f as FusionId);
        }
        map
    }

    /// Per-blocklet (x, z) port label masks of a web composition.
    pub fn comp_masks(&self, comp: &[(BlockletId, u32)]) -> Vec<(BlockletId, WebMasks)> {
        comp.iter()
            .filter(|(_, mask)| *mask != 0)
            .map(|&(b, mask)| {
                let t = self.template_of(b);
                let mut m = WebMasks::default();
                for (wi, w) in t.webs.iter().enumerate() {
                    if (mask >> wi) & 1 == 1 {
                        m.top_x ^= w.top_x;
                        m.top_z ^= w.top_z;
                        m.bot_x ^= w.bot_x;
                        m.bot_z ^= w.bot_z;
                    }
                }
                (b, m)
            })
            .collect()
    }

    /// Derives the sorted outcome-bit list of a composition, checking that
    /// labels match on every fusion and that no unfused port carries one.
    pub fn resolve_comp(&self, comp: &[(BlockletId, u32)], ports: &PortMap) -> Result<Vec<BitId>, NetworkError> {
        let masks = self.comp_masks(comp);
        // fusion -> (x,z) label per endpoint side (bottom = 0, top = 1)
        let mut touched: HashMap<FusionId, [(bool, bool); 2]> = HashMap::new();
        for (b, m) in &masks {
            let n = self.template_of(*b).n();
            for i in 0..n {
                let tx = (m.top_x >> i) & 1 == 1;
                let tz = (m.top_z >> i) & 1 == 1;
                if tx || tz {
                    match ports.top[*b as usize][i] {
                        Some(f) => {
                            touched.entry(f).or_default()[1] = (tx, tz);
                        }
                        None => {
                            return Err(NetworkError::UnfusedSupport {
                                blocklet: *b,
                                port: PortLabel { side: Side::Top, index: i as u8 },
                            })
                        }
                    }
                }
                let bx = (m.bot_x >> i) & 1 == 1;
                let bz = (m.bot_z >> i) & 1 == 1;
                if bx || bz {
                    match ports.bottom[*b as usize][i] {
                        Some(f) => {
                            touched.entry(f).or_default()[0] = (bx, bz);
                        }
                        None => {
                            return Err(NetworkError::UnfusedSupport {
                                blocklet: *b,
                                port: PortLabel { side: Side::Bottom, index: i as u8 },
                            })
                        }
                    }
                }
            }
        }
        let mut bits = Vec::with_capacity(touched.len());
        for (&f, &[bot, top]) in touched.iter() {
            if bot != top {
                return Err(NetworkError::LabelMismatch {
                    fusion: f,
                    a: Pauli::from_bits(bot.0, bot.1),
                    b: Pauli::from_bits(top.0, top.1),
                });
            }
            if bot.0 {
                bits.push(Fusion::bit_x(f));
            }
            if bot.1 {
                bits.push(Fusion::bit_z(f));
            }
        }
        bits.sort_unstable();
        Ok(bits)
    }

    /// Re-derives all row bit lists from compositions.
    pub fn refresh_rows(&mut self) -> Result<(), NetworkError> {
        let ports = self.port_map();
        let mut checks = std::mem::take(&mut self.checks);
        for row in checks.iter_mut() {
            row.bits = self.resolve_comp(&row.comp, &ports)?;
        }
        self.checks = checks;
        let mut logicals = std::mem::take(&mut self.logicals);
        for row in logicals.iter_mut() {
            row.bits = self.resolve_comp(&row.comp, &ports)?;
        }
        self.logicals = logicals;
        Ok(())
    }

    /// Applies linking: selected fusions switch to the linked mode and every
    /// row referencing their XX bit toggles the ZZ bit.
    pub fn apply_linking(&mut self, pattern: &LinkPattern) {
        let selected: Vec<FusionId> = match pattern {
            LinkPattern::SkipFourth { offset } => (0..self.fusions.len() as FusionId)
                .filter(|f| f % 4 != (*offset as FusionId) % 4)
                .collect(),
            LinkPattern::Explicit(list) => list.clone(),
        };
        let mut is_linked = vec![false; self.fusions.len()];
        for &f in &selected {
            is_linked[f as usize] = true;
            self.fusions[f as usize].linked = true;
        }
        let rewrite = |bits: &mut Vec<BitId>| {
            let mut set: std::collections::BTreeSet<BitId> = bits.iter().copied().collect();
            for &b in bits.iter() {
                if b % 2 == 0 && is_linked[(b / 2) as usize] {
                    let bz = b + 1;
                    if !set.insert(bz) {
                        set.remove(&bz);
                    }
                }
            }
            *bits = set.into_iter().collect();
        };
        for row in self.checks.iter_mut() {
            rewrite(&mut row.bits);
        }
        for row in self.logicals.iter_mut() {
            rewrite(&mut row.bits);
        }
        self.params.linking = Some(pattern.clone());
    }

    /// Basis of all closed webs supported on `members`: label assignments
    /// that are a web of every member blocklet, match across every internal
    /// fusion, and are identity elsewhere. Returned as outcome-bit rows.
    pub fn find_closed_webs(&self, members: &[BlockletId]) -> Result<Vec<Vec<BitId>>, NetworkError> {
        if members.len() > 30 {
            return Err(NetworkError::Build(format!(
                "closed-web search limited to 30 blocklets (got {})",
                members.len()
            )));
        }
        let sols = self.closed_web_comps(members)?;
        let ports = self.port_map();
        sols.iter().map(|comp| self.resolve_comp(comp, &ports)).collect()
    }

    /// As `find_closed_webs` but returning web compositions.
    pub fn closed_web_comps(&self, members: &[BlockletId]) -> Result<Vec<Vec<(BlockletId, u32)>>, NetworkError> {
        use crate::gf2::{BitMatrix, BitVec};
        let member_set: std::collections::HashSet<BlockletId> = members.iter().copied().collect();
        let ports = self.port_map();
        // variable layout: per member, its template web count
        let mut offset = Vec::with_capacity(members.len());
        let mut total = 0usize;
        for &b in members {
            offset.push(total);
            total += self.template_of(b).web_count();
        }
        let index_of = |b: BlockletId| members.iter().position(|&x| x == b).unwrap();
        // constraint rows over `total` variables
        let mut rows: Vec<BitVec> = Vec::new();
        let port_row = |b: BlockletId, side: Side, port: usize, want_x: bool| -> BitVec {
            let mi = index_of(b);
            let t = self.template_of(b);
            let mut row = BitVec::zeros(total);
            for (wi, w) in t.webs.iter().enumerate() {
                let bit = match (side, want_x) {
                    (Side::Top, true) => (w.top_x >> port) & 1 == 1,
                    (Side::Top, false) => (w.top_z >> port) & 1 == 1,
                    (Side::Bottom, true) => (w.bot_x >> port) & 1 == 1,
                    (Side::Bottom, false) => (w.bot_z >> port) & 1 == 1,
                };
                if bit {
                    row.set(offset[mi] + wi, true);
                }
            }
            row
        };
        for &b in members {
            let n = self.template_of(b).n();
            for side in [Side::Top, Side::Bottom] {
                for port in 0..n {
                    let fusion = match side {
                        Side::Top => ports.top[b as usize][port],
                        Side::Bottom => ports.bottom[b as usize][port],
                    };
                    let internal = fusion.is_some_and(|f| {
                        let fu = &self.fusions[f as usize];
                        member_set.contains(&fu.bottom.0) && member_set.contains(&fu.top.0)
                    });
                    if internal {
                        // handled once, from the bottom endpoint
                        let f = fusion.unwrap();
                        let fu = &self.fusions[f as usize];
                        if (fu.bottom.0, fu.bottom.1 as usize) != (b, port) || side != Side::Bottom {
                            continue;
                        }
                        for want_x in [true, false] {
                            let mut row = port_row(fu.bottom.0, Side::Bottom, fu.bottom.1 as usize, want_x);
                            row.xor_in(&port_row(fu.top.0, Side::Top, fu.top.1 as usize, want_x));
                            rows.push(row);
                        }
                    } else {
                        for want_x in [true, false] {
                            rows.push(port_row(b, side, port, want_x));
                        }
                    }
                }
            }
        }
        let m = BitMatrix::from_rows(&rows);
        let kernel = m.kernel();
        let mut out = Vec::new();
        for r in 0..kernel.rows() {
            let x = kernel.row(r);
            let mut comp: Vec<(BlockletId, u32)> = Vec::new();
            for (mi, &b) in members.iter().enumerate() {
                let wc = self.template_of(b).web_count();
                let mut mask = 0u32;
                for w in 0..wc {
                    if x.get(offset[mi] + w) {
                        mask |= 1 << w;
                    }
                }
                if mask != 0 {
                    comp.push((b, mask));
                }
            }
            out.push(comp);
        }
        Ok(out)
    }

    /// Packed check matrix and logical matrix over outcome bits.
    pub fn matrices(&self) -> (crate::gf2::BitMatrix, crate::gf2::BitMatrix) {
        let bits = self.bit_count();
        let mut h = crate::gf2::BitMatrix::zeros(self.checks.len(), bits);
        for (r, row) in self.checks.iter().enumerate() {
            for &b in &row.bits {
                h.set(r, b as usize, true);
            }
        }
        let mut l = crate::gf2::BitMatrix::zeros(self.logicals.len(), bits);
        for (r, row) in self.logicals.iter().enumerate() {
            for &b in &row.bits {
                l.set(r, b as usize, true);
            }
        }
        (h, l)
    }
}

#[derive(Default, Clone, Copy, Debug)]
pub struct WebMasks {
    pub top_x: u32,
    pub top_z: u32,
    pub bot_x: u32,
    pub bot_z: u32,
}

pub struct PortMap {
    pub top: Vec<Vec<Option<FusionId>>>,
    pub bottom: Vec<Vec<Option<FusionId>>>,
}

#[cfg(test)]
mod tests {
    use crate::builder::build_foliated;
    use crate::codes::builtin;

    #[test]
    fn serialization_roundtrip_bit_exact() {
        let net = build_foliated(&builtin("[5,1,3]").unwrap(), 4, true).unwrap();
        let doc = serde_json::to_string(&net).unwrap();
        let back: super::FusionNetwork = serde_json::from_str(&doc).unwrap();
        let (h1, l1) = net.matrices();
        let (h2, l2) = back.matrices();
        assert!(h1 == h2 && l1 == l2);
        assert_eq!(net.fusions.len(), back.fusions.len());
    }
}
