//! Acceptance criteria. Runs as a plain binary (`harness = false`) so every
//! criterion prints a PASS/FAIL line; exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::Rng;
use wordmap::pipeline::{self, PipelineConfig};
use wordmap::tokenizer::{count_and_filter, tokenize, Stoplist, TokenCounts};
use wordmap::tsne::{
    calibrate_affinities, gradient, kl_divergence, low_dim_affinities, pairwise_squared_distances,
    run_tsne, TsneConfig,
};
use wordmap::{diff, parse_map, EmbeddingModel, ModelFormat, SetLabel};

use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(
        elapsed < limit,
        format!("took {:?}, limit {:?}", elapsed, limit),
    )
}

fn word2vec_roundtrip() -> Outcome {
    let start = Instant::now();
    let mut r = rng(0x5eed_0001);
    for case in 0..20 {
        let model = random_model(&mut r, 100, 50, true);
        let bytes = model.to_binary();
        let parsed = EmbeddingModel::parse(&bytes, ModelFormat::Binary)
            .map_err(|e| format!("case {}: {}", case, e))?;
        check(
            parsed == model,
            format!("case {}: parsed model differs", case),
        )?;
        check(
            parsed.to_binary() == bytes,
            format!("case {}: bytes differ", case),
        )?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("20 models bytewise identical in {:?}", elapsed))
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut r = rng(0x5eed_0002);
    let mut checked = 0;
    let (mut worst_rel, mut worst_abs) = (0.0f64, 0.0f64);
    for &n in &[5usize, 10, 20] {
        for &d in &[3usize, 300] {
            let x = random_matrix(&mut r, n, d, 1.0);
            let dist = pairwise_squared_distances(x.view()).map_err(|e| e.to_string())?;
            let perplexity = n as f64 / 3.0 + 1.0;
            let p = calibrate_affinities(dist.view(), perplexity)
                .map_err(|e| e.to_string())?
                .affinities
                .into_inner();
            let y = random_matrix(&mut r, n, 2, 1.0);
            let (q, num) = low_dim_affinities(y.view());
            let analytic = gradient(p.view(), q.view(), num.view(), y.view());
            let numeric = finite_difference_gradient(&p, &y, 1e-5);
            for ((idx, &a), &f) in analytic.indexed_iter().zip(numeric.iter()) {
                if !close(a, f, 1e-4, 1e-7) {
                    return Err(format!(
                        "n={} d={} {:?}: analytic {} vs numeric {}",
                        n, d, idx, a, f
                    ));
                }
                worst_abs = worst_abs.max((a - f).abs());
                if a.abs().max(f.abs()) > 1e-7 {
                    worst_rel = worst_rel.max((a - f).abs() / a.abs().max(f.abs()));
                }
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "{} components, worst abs error {:.2e}, worst rel error {:.2e}, {:?}",
        checked, worst_abs, worst_rel, elapsed
    ))
}

fn affinity_invariants() -> Outcome {
    let start = Instant::now();
    let mut r = rng(0x5eed_0003);
    let mut worst_gap = 0.0f64;
    for case in 0..50 {
        let n = r.random_range(5..=60);
        let d = r.random_range(1..=50);
        let scale = 10f64.powf(r.random_range(-2.0..2.0));
        let x = random_matrix(&mut r, n, d, scale);
        let perplexity = r.random_range(1.5..(n as f64 - 1.0).min(30.0));
        let dist = pairwise_squared_distances(x.view()).map_err(|e| e.to_string())?;
        let cal = calibrate_affinities(dist.view(), perplexity).map_err(|e| e.to_string())?;
        check(
            cal.unconverged.is_empty(),
            format!("case {}: unconverged rows {:?}", case, cal.unconverged),
        )?;
        let p = cal.affinities.view();
        let mut total = 0.0;
        for i in 0..n {
            check(
                p[[i, i]] == 0.0,
                format!("case {}: diagonal {} nonzero", case, i),
            )?;
            for j in 0..n {
                check(
                    p[[i, j]].to_bits() == p[[j, i]].to_bits(),
                    format!("case {}: asymmetric at ({}, {})", case, i, j),
                )?;
                check(p[[i, j]] >= 0.0, format!("case {}: negative entry", case))?;
                total += p[[i, j]];
            }
        }
        check(
            (total - 1.0).abs() <= 1e-9,
            format!("case {}: sum {}", case, total),
        )?;
        let target = perplexity.log2();
        for i in 0..n {
            let gap = (realized_log2_perplexity(&x, i, cal.bandwidth(i)) - target).abs();
            worst_gap = worst_gap.max(gap);
            check(
                gap <= 1e-5,
                format!(
                    "case {} point {}: log2-perplexity off by {:.3e}",
                    case, i, gap
                ),
            )?;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "50 instances, worst log2-perplexity gap {:.2e}, {:?}",
        worst_gap, elapsed
    ))
}

fn kl_identity() -> Outcome {
    let mut r = rng(0x5eed_0004);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let x = random_matrix(&mut r, 25, 10, 1.0);
        let dist = pairwise_squared_distances(x.view()).map_err(|e| e.to_string())?;
        let p = calibrate_affinities(dist.view(), 8.0)
            .map_err(|e| e.to_string())?
            .affinities;
        let kl = kl_divergence(&p, p.view());
        worst = worst.max(kl.abs());
        check(kl.abs() <= 1e-12, format!("KL(p, p) = {}", kl))?;

        let y = random_matrix(&mut r, 25, 2, 1.0);
        let (q, _) = low_dim_affinities(y.view());
        let kl_pq = kl_divergence(&p, q.view());
        check(kl_pq >= -1e-12, format!("KL(p, q) = {} is negative", kl_pq))?;
    }
    Ok(format!("max |KL(p, p)| = {:e}", worst))
}

fn cluster_preservation() -> Outcome {
    let start = Instant::now();
    let (x, labels) = two_clusters(0x5eed_0005, 50, 300, 10.0);
    let config = TsneConfig::default();
    let result = run_tsne(x.view(), &config).map_err(|e| e.to_string())?;
    let agreement = one_nn_agreement(&result.coords, &labels);
    check(agreement >= 0.9, format!("1-NN agreement {:.2}", agreement))?;
    let initial = result.initial_kl();
    let phase_end = result
        .kl_at(config.early_exaggeration_iters)
        .ok_or("no KL sample at the end of early exaggeration")?;
    check(
        result.final_kl < initial,
        format!("final KL {} >= initial {}", result.final_kl, initial),
    )?;
    check(
        result.final_kl < phase_end,
        format!(
            "final KL {} >= KL at exaggeration end {}",
            result.final_kl, phase_end
        ),
    )?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!(
        "1-NN agreement {:.0}%, KL {:.4} -> {:.4} (phase end {:.4}), {:?}",
        agreement * 100.0,
        initial,
        result.final_kl,
        phase_end,
        elapsed
    ))
}

fn analogy_oracle() -> Outcome {
    let royal = royal_model();
    let hits = royal
        .analogy(&["king", "woman"], &["man"], 1)
        .map_err(|e| e.to_string())?;
    check(
        hits.first().map(|h| h.word.as_str()) == Some("queen"),
        format!("king - man + woman gave {:?}", hits),
    )?;

    let mut r = rng(0x5eed_0006);
    let mut queries = 0;
    for m in 0..10 {
        let model = random_model(&mut r, 80, 20, false);
        if model.vocab_size() < 4 {
            continue;
        }
        let words: Vec<&str> = model.words().iter().map(String::as_str).collect();
        for _ in 0..10 {
            let k = r.random_range(1..=model.vocab_size() + 2);
            let picks: Vec<&str> = words.choose_multiple(&mut r, 3).copied().collect();
            let (pos, neg) = if r.random_bool(0.5) {
                (vec![picks[0]], vec![])
            } else {
                (vec![picks[0], picks[1]], vec![picks[2]])
            };
            let got = if neg.is_empty() {
                model.nearest(pos[0], k)
            } else {
                model.analogy(&pos, &neg, k)
            }
            .map_err(|e| e.to_string())?;
            let want = brute_force_analogy(&model, &pos, &neg, k);
            check(
                got.len() == want.len(),
                format!("model {}: {} hits, oracle {}", m, got.len(), want.len()),
            )?;
            for (g, w) in got.iter().zip(&want) {
                check(
                    g.word == w.0 && (g.score - w.1).abs() <= 1e-6,
                    format!("model {}: got {:?}, oracle {:?}", m, g, w),
                )?;
            }
            queries += 1;
        }
    }
    Ok(format!(
        "queen found; {} random queries match brute force",
        queries
    ))
}

fn diff_partition() -> Outcome {
    let mut r = rng(0x5eed_0007);
    let pool: Vec<String> = (0..300).map(|i| format!("w{}", i)).collect();
    for case in 0..100 {
        let pick = |r: &mut rand_chacha::ChaCha8Rng| -> TokenCounts {
            let size = r.random_range(0..200);
            pool.choose_multiple(r, size)
                .map(|w| (w.clone(), r.random_range(1..50u64)))
                .collect()
        };
        let a = pick(&mut r);
        let b = pick(&mut r);
        let d = diff(&a, &b);
        let union: BTreeSet<&str> = a.vocabulary().chain(b.vocabulary()).collect();
        check(
            d.len() == union.len(),
            format!("case {}: sets do not cover the union", case),
        )?;
        for w in &pool {
            let (ia, ib) = (a.get(w), b.get(w));
            let memberships = [
                d.only_a.contains_key(w),
                d.only_b.contains_key(w),
                d.both.contains_key(w),
            ];
            check(
                memberships.iter().filter(|&&m| m).count() <= 1,
                format!("case {}: {} in several sets", case, w),
            )?;
            let expected = match (ia, ib) {
                (Some(_), Some(_)) => Some(SetLabel::Both),
                (Some(_), None) => Some(SetLabel::AOnly),
                (None, Some(_)) => Some(SetLabel::BOnly),
                (None, None) => None,
            };
            check(
                d.label(w) == expected,
                format!("case {}: {} labelled {:?}", case, w, d.label(w)),
            )?;
            if expected.is_some() {
                check(
                    d.counts(w) == Some((ia.unwrap_or(0), ib.unwrap_or(0))),
                    format!("case {}: counts of {}", case, w),
                )?;
            }
        }
    }
    Ok("100 random vocabulary pairs".into())
}

fn end_to_end_determinism() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let mut config = PipelineConfig::new(
            fixture("got-2013.txt"),
            fixture("fixture-model.bin"),
            dir.path().join(name),
        );
        config.source_b = Some(fixture("got-2015.txt"));
        config.stoplist = Some(fixture("stoplist.txt"));
        config.tsne.perplexity = 5.0;
        config.tsne.seed = 2015;
        config.generated_at = Some("2015-05-26T00:00:00Z".into());
        pipeline::run(&config).map_err(|e| e.to_string())?;
        std::fs::read(dir.path().join(name)).map_err(|e| e.to_string())
    };
    let first = run("first.json")?;
    let second = run("second.json")?;
    check(first == second, "map files differ between runs")?;
    let map = parse_map(&first).map_err(|e| e.to_string())?;
    check(
        map.set_counts() == (5, 6, 8),
        format!("set sizes {:?}", map.set_counts()),
    )?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(10))?;
    Ok(format!(
        "{} bytes identical across runs, schema-valid, {:?}",
        first.len(),
        elapsed
    ))
}

fn stoplist_criterion() -> Outcome {
    let stop = Stoplist::bundled();
    check(
        stop.len() == 3000,
        format!("bundled list has {} entries", stop.len()),
    )?;

    // Text built from stoplist words in mixed case plus filler.
    let mut r = rng(0x5eed_0009);
    let entries: Vec<&str> = stop.iter().collect();
    let mut text = String::new();
    for i in 0..5000 {
        let w = entries.choose(&mut r).unwrap();
        let w = match i % 3 {
            0 => w.to_uppercase(),
            1 => {
                let mut c = w.chars();
                c.next()
                    .map(|f| f.to_uppercase().chain(c).collect())
                    .unwrap_or_default()
            }
            _ => w.to_string(),
        };
        text.push_str(&w);
        text.push_str(if i % 7 == 0 { ", " } else { " " });
        if i % 11 == 0 {
            text.push_str("Winterfell ");
        }
    }
    let counts = count_and_filter(&tokenize(&text), &stop, true);
    let leaked: Vec<&String> = counts
        .counts()
        .keys()
        .filter(|w| stop.contains(w))
        .collect();
    check(
        leaked.is_empty(),
        format!(
            "stoplist members survived: {:?}",
            &leaked[..leaked.len().min(5)]
        ),
    )?;
    check(
        counts.get("Winterfell").is_some(),
        "non-stoplist word was lost",
    )?;
    let kept: BTreeMap<_, _> = counts.counts().clone();
    Ok(format!(
        "3000 entries; {} distinct survivors, none stoplisted",
        kept.len()
    ))
}

fn main() {
    let criteria: &[Criterion] = &[
        ("word2vec binary roundtrip", word2vec_roundtrip),
        ("t-SNE gradient check", gradient_check),
        ("affinity invariants", affinity_invariants),
        ("KL identity", kl_identity),
        ("cluster preservation", cluster_preservation),
        ("analogy oracle", analogy_oracle),
        ("diff partition", diff_partition),
        ("end-to-end determinism", end_to_end_determinism),
        ("stoplist", stoplist_criterion),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        match criterion() {
            Ok(detail) => println!("PASS  {:<28} {}", name, detail),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:<28} {}", name, why);
            }
        }
    }
    println!(
        "{} of {} acceptance criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
