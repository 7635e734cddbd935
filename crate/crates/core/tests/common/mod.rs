#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ris_idbp::acceptance::scaled_config;
use ris_idbp::channel::{synthesize_channel, ChannelRealization};
use ris_idbp::metrics::LeafObjective;
use ris_idbp::transceiver::{DesignOptions, FsChoice, TransceiverSet};
use ris_idbp::SystemConfig;

pub struct Link {
    pub cfg: SystemConfig,
    pub channel: ChannelRealization,
    pub set: TransceiverSet,
}

impl Link {
    pub fn leaf(&self) -> LeafObjective {
        LeafObjective::new(&self.channel, &self.set, &self.cfg).unwrap()
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn link_with(cfg: SystemConfig, seed: u64, phases: &[usize]) -> Link {
    let cfg = cfg.with_seed(seed);
    let channel = synthesize_channel(&cfg, &mut rng(seed)).unwrap();
    let (set, _) =
        TransceiverSet::design(&channel, &cfg, DesignOptions::default(), FsChoice::Identity, phases).unwrap();
    Link { cfg, channel, set }
}

/// Reference link with `m` elements; small surfaces get fewer interferers and streams.
pub fn link(m: usize, seed: u64) -> Link {
    let cfg = if m >= 12 { SystemConfig::reference(m) } else { scaled_config(m) };
    link_with(cfg, seed, &vec![0; m])
}

pub fn all_sequences(k: usize, m: usize) -> Vec<Vec<usize>> {
    let n = k.pow(m as u32);
    (0..n)
        .map(|mut idx| {
            let mut s = vec![0; m];
            for pos in (0..m).rev() {
                s[pos] = idx % k;
                idx /= k;
            }
            s
        })
        .collect()
}
