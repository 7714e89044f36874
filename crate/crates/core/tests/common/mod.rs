//! Brute-force oracles that share no code with the library's analysis path.
#![allow(dead_code)]

fn choose(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut num = 1.0;
    let mut den = 1.0;
    for i in 0..k {
        num *= (n - i) as f64;
        den *= (i + 1) as f64;
    }
    num / den
}

/// Exact distribution of the number of delivered packets when `total`
/// packets contend for `slots` slots, by enumerating how many nodes transmit
/// in every slot.
pub fn success_count_distribution(total: usize, slots: usize, p: f64) -> Vec<f64> {
    fn walk(pending: usize, slots_left: usize, delivered: usize, prob: f64, p: f64, out: &mut [f64]) {
        if slots_left == 0 || pending == 0 {
            out[delivered] += prob;
            return;
        }
        for k in 0..=pending {
            let pk = choose(pending, k) * p.powi(k as i32) * (1.0 - p).powi((pending - k) as i32);
            if pk == 0.0 {
                continue;
            }
            if k == 1 {
                walk(pending - 1, slots_left - 1, delivered + 1, prob * pk, p, out);
            } else {
                walk(pending, slots_left - 1, delivered, prob * pk, p, out);
            }
        }
    }
    let mut out = vec![0.0; total + 1];
    walk(total, slots, 0, 1.0, p, &mut out);
    out
}

/// A frame small enough to enumerate every random outcome.
#[derive(Debug, Clone, Copy)]
pub struct SmallSystem {
    pub n_pull: usize,
    pub n_push: usize,
    pub slots: usize,
    pub reserved: usize,
    pub p: f64,
    pub p_wake: f64,
    pub p_active: f64,
    pub slot_duration: f64,
    pub power_tx: f64,
    pub power_rx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exact {
    pub gamma_w: f64,
    pub gamma_u: f64,
    pub e_tot: f64,
}

/// Exact metrics by walking every wake-up set, active push set and
/// per-node transmission pattern of every slot.
pub fn enumerate_frame(sys: &SmallSystem) -> Exact {
    struct Walk<'a> {
        sys: &'a SmallSystem,
        acc: Exact,
    }

    impl Walk<'_> {
        fn slot(&mut self, t: usize, pull: u32, push: u32, n_push_active: u32, prob: f64, energy: f64) {
            let sys = self.sys;
            if t > sys.slots {
                self.acc.gamma_w += prob * if pull == 0 { 1.0 } else { 0.0 };
                let ratio = if n_push_active == 0 {
                    1.0
                } else {
                    (n_push_active - push.count_ones()) as f64 / n_push_active as f64
                };
                self.acc.gamma_u += prob * ratio;
                self.acc.e_tot += prob * energy;
                return;
            }
            let shared = t > sys.reserved;
            let push_in = if shared { push } else { 0 };
            // contenders: pull nodes in the low bits, push nodes shifted up by 8
            let contenders = pull | (push_in << 8);
            let mut subset = contenders;
            loop {
                let k = subset.count_ones();
                let n = contenders.count_ones();
                let pr = sys.p.powi(k as i32) * (1.0 - sys.p).powi((n - k) as i32);
                if pr > 0.0 {
                    let pull_tx = (subset & 0xff).count_ones();
                    let pull_rx = pull.count_ones() - pull_tx;
                    let e = energy
                        + pull_tx as f64 * sys.slot_duration * sys.power_tx
                        + pull_rx as f64 * sys.slot_duration * sys.power_rx;
                    let (np, nq) = if k == 1 {
                        (pull & !(subset & 0xff), push & !(subset >> 8))
                    } else {
                        (pull, push)
                    };
                    self.slot(t + 1, np, nq, n_push_active, prob * pr, e);
                }
                if subset == 0 {
                    break;
                }
                subset = (subset - 1) & contenders;
            }
        }
    }

    let mut walk = Walk {
        sys,
        acc: Exact {
            gamma_w: 0.0,
            gamma_u: 0.0,
            e_tot: 0.0,
        },
    };
    for wake in 0u32..(1 << sys.n_pull) {
        let w = wake.count_ones() as i32;
        let pw = sys.p_wake.powi(w) * (1.0 - sys.p_wake).powi(sys.n_pull as i32 - w);
        for active in 0u32..(1 << sys.n_push) {
            let u = active.count_ones() as i32;
            let pu = sys.p_active.powi(u) * (1.0 - sys.p_active).powi(sys.n_push as i32 - u);
            if pw * pu > 0.0 {
                walk.slot(1, wake, active, u as u32, pw * pu, 0.0);
            }
        }
    }
    walk.acc
}
