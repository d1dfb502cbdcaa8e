//! Install-verification suite behind `rrl selftest`: quick versions of
//! the codec and gradient property checks, one pass/fail line each.

use crate::codec::{
    f16_bits_to_f32, f32_to_f16_bits, index_wire_decode, index_wire_encode, orc_encode, OrcConfig,
};
use crate::dist::{Categorical, DiagGaussian, Distribution};
use crate::policy::{init_params, nll_grad_check, Arch, BcBatch, HeadKind};
use crate::prng::{exp1, hash64, uniform64, Purpose, StreamKey};

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

pub fn run_selftest() -> Vec<CheckResult> {
    let mut out = Vec::new();

    // frozen mixing-function vectors
    let vec_ok = hash64(StreamKey::new(0, Purpose::Candidate)) == 0x78ae5a9a6b5fd45e
        && hash64(StreamKey::new(0, Purpose::Candidate).with_counter(1)) == 0x2b0619420fa97989
        && hash64(StreamKey::at(42, 7, 123, 2, Purpose::ActionSample).with_counter(99))
            == 0xe3a97d97cc1ee654;
    out.push(check(
        "prng normative vectors",
        vec_ok,
        "key->hash64 frozen vectors".into(),
    ));

    let n = 100_000;
    let mean: f64 = (0..n)
        .map(|c| exp1(StreamKey::new(7, Purpose::Exponential).with_counter(c)))
        .sum::<f64>()
        / n as f64;
    out.push(check(
        "exponential sampler mean",
        (mean - 1.0).abs() < 0.02,
        format!("mean {mean:.4} (want 1.00 +- 0.02)"),
    ));

    let p: Distribution = Categorical::new(vec![0.62, 0.23, 0.1, 0.05]).unwrap().into();
    let u: Distribution = Categorical::uniform(4).into();
    let identity = (p.entropy() + p.kl(&u).unwrap() - 2.0).abs();
    out.push(check(
        "entropy + KL(P,U) identity",
        identity < 1e-9,
        format!("|H + D - log2(4)| = {identity:.2e}"),
    ));

    let cfg = OrcConfig::default();
    let mut all_one = true;
    for s in 0..200 {
        let key = StreamKey::at(3, 0, s, 0, Purpose::Candidate);
        let (_, msg) = orc_encode(&p, &p, &cfg, key).unwrap();
        all_one &= msg.index == 1;
    }
    out.push(check(
        "remote generation P=Q sends index 1",
        all_one,
        "200 encodes".into(),
    ));

    // total variation of the decoded distribution at N=256
    let q: Distribution = Categorical::uniform(4).into();
    let trials = 20_000;
    let mut counts = [0usize; 4];
    for s in 0..trials {
        let key = StreamKey::at(11, 0, s, 0, Purpose::Candidate);
        let (a, _) = orc_encode(&p, &q, &cfg, key).unwrap();
        counts[a.as_discrete().unwrap()] += 1;
    }
    let probs = match &p {
        Distribution::Categorical(c) => c.probs().to_vec(),
        _ => unreachable!(),
    };
    let tv: f64 = 0.5
        * counts
            .iter()
            .zip(&probs)
            .map(|(&c, &pi)| (c as f64 / trials as f64 - pi).abs())
            .sum::<f64>();
    out.push(check(
        "remote generation sampling fidelity",
        tv <= 0.03,
        format!("TV {tv:.4} at N=256, {trials} trials"),
    ));

    // rate bound on a small divergence grid
    let mut bound_ok = true;
    let mut worst = f64::NEG_INFINITY;
    for (i, heavy) in [0.6, 0.8, 0.9, 0.97].iter().enumerate() {
        let rest = (1.0 - heavy) / 7.0;
        let mut pv = vec![rest; 8];
        pv[0] = *heavy;
        let p: Distribution = Categorical::new(pv).unwrap().into();
        let q: Distribution = Categorical::uniform(8).into();
        let d = p.kl(&q).unwrap();
        let n_list = 1u32 << (d.ceil() as u32 + 4);
        let cfg = OrcConfig::with_list_size(n_list.max(2)).unwrap();
        let trials = 2_000;
        let mean: f64 = (0..trials)
            .map(|s| {
                let key = StreamKey::at(100 + i as u64, 0, s, 0, Purpose::Candidate);
                orc_encode(&p, &q, &cfg, key).unwrap().1.ideal_bits
            })
            .sum::<f64>()
            / trials as f64;
        let bound = d + (d + 1.0).log2() + 4.0;
        bound_ok &= mean <= bound;
        worst = worst.max(mean - bound);
    }
    out.push(check(
        "rate bound D + log2(D+1) + 4",
        bound_ok,
        format!("worst slack {worst:.3} bits (negative is good)"),
    ));

    let mut elias_ok = true;
    for n in 1u64..=4096 {
        let (bytes, len) = index_wire_encode(n).unwrap();
        elias_ok &= index_wire_decode(&bytes, len).unwrap() == n;
    }
    out.push(check(
        "self-delimiting index code round trip",
        elias_ok,
        "n in 1..=4096".into(),
    ));

    let f16_ok = f32_to_f16_bits(1.0) == 0x3c00
        && f32_to_f16_bits(0.1) == 0x2e66
        && f32_to_f16_bits(65520.0) == 0x7c00
        && f32_to_f16_bits(2051.0) == 0x6802
        && f16_bits_to_f32(0x3555) == 0.33325195;
    out.push(check(
        "binary16 round-to-nearest-even",
        f16_ok,
        "published vector spot checks".into(),
    ));

    // gradient checks on both heads
    for (name, arch, seed) in [
        (
            "NLL gradient check (discrete)",
            Arch {
                input_dim: 3,
                hidden: vec![4, 4],
                head: HeadKind::Discrete,
                action_dim: 3,
            },
            42u64,
        ),
        (
            "NLL gradient check (gaussian)",
            Arch {
                input_dim: 2,
                hidden: vec![4],
                head: HeadKind::Gaussian,
                action_dim: 2,
            },
            43,
        ),
    ] {
        let params = init_params(seed, &arch);
        let key = StreamKey::new(seed ^ 1, Purpose::ActionSample);
        let mut batch = BcBatch::default();
        for i in 0..8u64 {
            let s: Vec<f64> = (0..arch.input_dim)
                .map(|j| 2.0 * uniform64(key.with_counter(i * 16 + j as u64)) - 1.0)
                .collect();
            let d = crate::policy::forward(&params, &s).unwrap();
            batch.actions.push(d.sample(key.with_counter(1000 + i)));
            batch.states.push(s);
        }
        let err = nll_grad_check(&params, &batch).unwrap();
        out.push(check(name, err <= 1e-4, format!("max rel err {err:.2e}")));
    }

    // gaussian sampler moments
    let g: Distribution = DiagGaussian::new(vec![0.0], vec![1.0]).unwrap().into();
    let n = 50_000;
    let key = StreamKey::new(77, Purpose::ActionSample);
    let xs: Vec<f64> = (0..n)
        .map(|c| g.sample(key.with_counter(c)).as_continuous().unwrap()[0])
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    out.push(check(
        "gaussian sampler moments",
        mean.abs() < 0.02 && (var - 1.0).abs() < 0.03,
        format!("mean {mean:.4}, var {var:.4}"),
    ));

    out
}
