//! The symbolic engine and the miner checked against independent reference
//! implementations from `featint-oracle`.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use featint_core::flc::{parse_unit, resolve_product, LowerOptions, ProductDef};
use featint_core::mine::apriori;
use featint_core::modelx::annotate_metadata_vars;
use featint_core::symex::{extract_feature_models, EngineConfig, ExtractResult, StoreKeyMode};
use featint_oracle::interp::{enumerate_runs, match_paths};
use featint_oracle::itemsets::{frequent_itemsets, random_corpus};
use featint_oracle::lastwriter::{engine_dependencies, StraightLine};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn product(features: &[&str]) -> ProductDef {
    ProductDef {
        name: "p".into(),
        enabled: features.iter().map(|s| s.to_string()).collect(),
    }
}

fn run_engine(src: &str, p: &ProductDef, config: &EngineConfig) -> ExtractResult {
    let unit = parse_unit(src, "t.flc").unwrap();
    let program = resolve_product(
        &unit,
        p,
        &LowerOptions {
            loop_bound: config.loop_bound,
        },
    )
    .unwrap();
    extract_feature_models(&program, config).unwrap()
}

#[test]
fn straight_line_dependencies_match_last_writer() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for case in 0..500 {
        let prog = StraightLine::random(&mut rng, 30);
        let src = prog.to_flc();
        for (mode, per_element) in [(StoreKeyMode::BaseAddress, false), (StoreKeyMode::ObjectOffset, true)] {
            let config = EngineConfig {
                store_key_mode: mode,
                ..EngineConfig::default()
            };
            let result = run_engine(&src, &product(&[]), &config);
            assert_eq!(result.paths.len(), 1, "case {case}: straight-line code forked\n{src}");
            assert_eq!(
                engine_dependencies(&result),
                prog.dependencies(per_element),
                "case {case} ({mode}):\n{src}"
            );
        }
    }
    assert!(started.elapsed().as_secs() < 30, "took {:?}", started.elapsed());
}

/// Programs covering branches, loops, every failure kind and metadata
/// variables, each with the products it is checked under.
const PROGRAMS: &[(&str, &[&[&str]])] = &[
    (
        "int g;
void main() {
  int x;
  make_symbolic(x, 0, 9);
  if (x > 4) {
    g = 1;
  } else {
    if (x == 2) {
      @spec(low) fail();
    }
  }
}
",
        &[&[]],
    ),
    (
        "features A, B;
int flag;
int level;
void main() {
  int a;
  int b;
  make_symbolic(a, 0, 3);
  make_symbolic(b, 0, 3);
#if A
  flag = a;
#endif
#if B
  if (flag == b && b > 0) {
    @spec(ab) fail();
  }
#else
  level = b;
#endif
#if A && !B
  assert(a != 3);
#endif
}
",
        &[&[], &["A"], &["B"], &["A", "B"]],
    ),
    (
        "void main() {
  int i;
  int n;
  make_symbolic(n, 0, 6);
  i = 0;
  while (i < n) {
    i = i + 1;
  }
}
",
        &[&[]],
    ),
    (
        "int arr[3];
void main() {
  int k;
  int d;
  make_symbolic(k, 0, 4);
  make_symbolic(d, 0, 2);
  arr[k] = 7;
  arr[0] = 10 / d;
  assume(k != 1);
}
",
        &[&[]],
    ),
    (
        "int total;
int classify(int v) {
  if (v > 2) {
    return 2;
  }
  if (v > 0) {
    return 1;
  }
  return 0;
}
void main() {
  int v;
  int c;
  make_symbolic(v, 0, 5);
  c = classify(v);
  total = classify(v - 3);
  if (c == 1 && total == 0) {
    @spec(mid) fail();
  }
}
",
        &[&[]],
    ),
    (
        "int8 small;
int16 mid;
void step() {
  int x;
  make_symbolic(x, 0, 2);
  small = small + x * 60;
}
void main() {
  step();
  step();
  mid = small * 300;
  if (small < 0) {
    @spec(wrap) fail();
  }
}
",
        &[&[]],
    ),
];

#[test]
fn terminated_paths_match_concrete_enumeration() {
    for (k, (src, products)) in PROGRAMS.iter().enumerate() {
        let unit = parse_unit(src, "t.flc").unwrap();
        let unit = annotate_metadata_vars(&unit).unwrap();
        for enabled in *products {
            let p = product(enabled);
            for loop_bound in [2, 8] {
                let config = EngineConfig {
                    loop_bound,
                    ..EngineConfig::default()
                };
                let program = resolve_product(&unit, &p, &LowerOptions { loop_bound }).unwrap();
                let result = extract_feature_models(&program, &config).unwrap();
                assert!(!result.truncated);
                let runs = enumerate_runs(&unit, &p, loop_bound as usize, 100_000).unwrap();
                assert!(!runs.is_empty());
                if let Err(e) = match_paths(&result, &runs) {
                    panic!("program {k}, product {enabled:?}, bound {loop_bound}: {e}");
                }
            }
        }
    }
}

#[test]
fn apriori_matches_exhaustive_counting() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..200 {
        let corpus = random_corpus(&mut rng, 20, 200);
        let min_support = [0.01, 0.05, 0.2, 0.5][case % 4];
        let max_size = 1 + case % 4;
        let expected = frequent_itemsets(&corpus, min_support, max_size);
        let got: BTreeMap<BTreeSet<String>, usize> = apriori(&corpus, min_support, max_size)
            .unwrap()
            .into_iter()
            .map(|f| {
                assert_eq!(f.support.to_f64(), f.count as f64 / corpus.len() as f64);
                (f.items.into_iter().collect(), f.count as usize)
            })
            .collect();
        assert_eq!(got, expected, "case {case}: support {min_support}, size {max_size}");
    }
    assert!(started.elapsed().as_secs() < 10, "took {:?}", started.elapsed());
}
