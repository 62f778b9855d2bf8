use blocklets::builder::*;
use blocklets::codes::builtin;
use blocklets::gf2::{BitMatrix, BitVec};
use blocklets::network::*;

fn bits_matrix(rows: &[Vec<u32>], width: usize) -> BitMatrix {
    let v: Vec<BitVec> = rows
        .iter()
        .map(|r| BitVec::from_ones(width, &r.iter().map(|&b| b as usize).collect::<Vec<_>>()))
        .collect();
    if v.is_empty() {
        BitMatrix::zeros(0, width)
    } else {
        BitMatrix::from_rows(&v)
    }
}

#[test]
fn inspect_missing_span() {
    for (name, layers) in [("[4,1,2]", 2u32), ("[4,1,2]", 4u32)] {
        let net = build_foliated(&builtin(name).unwrap(), layers, true).unwrap();
        let l2 = concatenate(&net).unwrap();
        if l2.blocklets.len() > 30 {
            println!("{} layers={} too big", name, layers);
            continue;
        }
        let width = l2.bit_count();
        let members: Vec<u32> = (0..l2.blocklets.len() as u32).collect();
        let closed_comps = l2.closed_web_comps(&members).unwrap();
        let ports = l2.port_map();
        let mut have: Vec<Vec<u32>> = l2.checks.iter().map(|c| c.bits.clone()).collect();
        have.extend(l2.logicals.iter().map(|l| l.bits.clone()));
        let m_have = bits_matrix(&have, width);
        println!(
            "{} layers={}: constructed rank {}, closed dim {}",
            name,
            layers,
            m_have.rank(),
            closed_comps.len()
        );
        // find closed webs outside the constructed span
        let mut work = m_have.clone();
        let mut base_rank = work.rank();
        for comp in &closed_comps {
            let bits = l2.resolve_comp(comp, &ports).unwrap();
            let row = BitVec::from_ones(width, &bits.iter().map(|&b| b as usize).collect::<Vec<_>>());
            let mut aug = work.clone();
            aug.push_row(&row);
            if aug.rank() > base_rank {
                base_rank += 1;
                work = aug;
                println!("  missing web:");
                for (b, mask) in comp {
                    let t = l2.template_of(*b);
                    let webs: Vec<String> = (0..t.web_count())
                        .filter(|w| (mask >> w) & 1 == 1)
                        .map(|w| format!("{:?}", t.webs[w].kind))
                        .collect();
                    let info = l2.blocklets[*b as usize];
                    println!("    bl{} (layer {}, pos {}): {}", b, info.layer, info.pos, webs.join(", "));
                }
            }
        }
    }
}
