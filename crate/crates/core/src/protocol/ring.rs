use crate::constellation::GroundNode;
use crate::units::SPEED_OF_LIGHT;

/// Parameter servers arranged in a ring ordered by longitude. The source is
/// the first server of the configuration; the sink is the ring-farthest
/// server from it.
#[derive(Debug, Clone, PartialEq)]
pub struct HapRing {
    /// Node indices in ring order.
    pub haps: Vec<usize>,
    /// Position of the source within `haps`.
    pub source_index: usize,
    /// Position of the sink within `haps`.
    pub sink_index: usize,
    pub ihl_rate_bps: f64,
    /// Propagation delay of edge `i` (between `haps[i]` and `haps[i+1]`).
    pub hop_delay_s: Vec<f64>,
}

impl HapRing {
    pub fn new(nodes: &[GroundNode], ihl_rate_bps: f64) -> Self {
        let mut haps: Vec<usize> = (0..nodes.len()).collect();
        haps.sort_by(|&a, &b| {
            nodes[a]
                .longitude_deg
                .total_cmp(&nodes[b].longitude_deg)
                .then(a.cmp(&b))
        });
        let n = haps.len();
        let source_index = haps.iter().position(|&h| h == 0).unwrap_or(0);
        let sink_index = (source_index + n / 2) % n.max(1);
        let hop_delay_s = (0..n)
            .map(|i| {
                let a = nodes[haps[i]].position_at(0.0);
                let b = nodes[haps[(i + 1) % n]].position_at(0.0);
                a.distance(b) / SPEED_OF_LIGHT
            })
            .collect();
        Self {
            haps,
            source_index,
            sink_index,
            ihl_rate_bps,
            hop_delay_s,
        }
    }

    pub fn len(&self) -> usize {
        self.haps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.haps.is_empty()
    }

    pub fn source_node(&self) -> usize {
        self.haps[self.source_index]
    }

    pub fn sink_node(&self) -> usize {
        self.haps[self.sink_index]
    }

    /// Minimum hop count between the source and ring position `pos`.
    pub fn hops_from_source(&self, pos: usize) -> usize {
        let n = self.len();
        let fwd = (pos + n - self.source_index) % n;
        fwd.min(n - fwd)
    }

    /// Time for a `bits`-sized message to travel from the source to every
    /// server, indexed by node index. The source forwards in both ring
    /// directions, so each server is reached over the faster arc. Reverse
    /// traffic to the source takes the same time.
    pub fn receipt_offsets(&self, bits: f64, instant: bool) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        if instant {
            return out;
        }
        let tx = bits / self.ihl_rate_bps;
        for (pos, &node) in self.haps.iter().enumerate() {
            let mut fwd = 0.0;
            let mut i = self.source_index;
            while i != pos {
                fwd += tx + self.hop_delay_s[i];
                i = (i + 1) % n;
            }
            let mut back = 0.0;
            let mut i = self.source_index;
            while i != pos {
                let prev = (i + n - 1) % n;
                back += tx + self.hop_delay_s[prev];
                i = prev;
            }
            out[node] = fwd.min(back);
        }
        out
    }
}

/// Receipt time of the global model at every server, starting at `t0`.
pub fn propagate_global(ring: &HapRing, model_bits: f64, t0: f64, instant: bool) -> Vec<f64> {
    ring.receipt_offsets(model_bits, instant)
        .into_iter()
        .map(|o| t0 + o)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::NodeKind;

    fn hap(lon: f64) -> GroundNode {
        GroundNode {
            name: format!("h{lon}"),
            latitude_deg: 0.0,
            longitude_deg: lon,
            altitude_m: 25e3,
            min_elevation_deg: 10.0,
            kind: NodeKind::Hap,
        }
    }

    #[test]
    fn single_server_is_immediate() {
        let r = HapRing::new(&[hap(0.0)], 5e8);
        assert_eq!(propagate_global(&r, 1e6, 3.0, false), vec![3.0]);
        assert_eq!(r.sink_node(), 0);
    }

    #[test]
    fn symmetric_four_ring() {
        let nodes = [hap(90.0), hap(0.0), hap(180.0), hap(-90.0)];
        let r = HapRing::new(&nodes, 5e8);
        assert_eq!(r.source_node(), 0);
        let sink_pos = r.sink_index;
        assert_eq!(r.hops_from_source(sink_pos), 2);
        assert_eq!(r.sink_node(), 3);
        let t = propagate_global(&r, 1e6, 0.0, false);
        let one_hop = t[1];
        assert!(one_hop > 0.0);
        assert!((t[2] - one_hop).abs() < 1e-12);
        assert!(t[3] > one_hop);
        assert!((t[3] - 2.0 * one_hop).abs() < 1e-9);
    }
}
