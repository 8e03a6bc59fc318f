use hypersparse::verify::{potential_check, size_bound_check};
use hypersparse::{
    generate, generate_hypergraph, parse_stream, run, GenSpec, Model, RankDist, SparsifierConfig, StoredHypergraph,
    WeightDist,
};
use proptest::prelude::*;

fn gen_spec() -> impl Strategy<Value = GenSpec> {
    (3usize..14, 0usize..120, 2usize..6, any::<u64>(), 0usize..3, 1usize..4).prop_map(
        |(n, m, r, seed, model, blocks)| GenSpec {
            n,
            m,
            rank: RankDist::Uniform(r.min(n)),
            weights: WeightDist::LogUniform { min: 0.05, max: 3.0 },
            model: match model {
                0 => Model::UniformSubsets,
                1 => Model::PlantedClusters { blocks: blocks.min(n) },
                _ => Model::GraphOnly,
            },
            seed,
        },
    )
}

fn config() -> impl Strategy<Value = (f64, f64, f64, u64)> {
    (0.1f64..0.9, 0.01f64..0.9, 0.05f64..3.0, any::<u64>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_streams_parse_within_bounds(spec in gen_spec()) {
        let text = generate(&spec).unwrap();
        let h = StoredHypergraph::parse_str(&text).unwrap();
        prop_assert_eq!(h.edges.len(), spec.m);
        for e in &h.edges {
            prop_assert!(e.rank() >= 2 && e.rank() <= spec.rank.max());
            prop_assert!(e.weight() >= 0.05 && e.weight() <= 3.0);
        }
    }

    #[test]
    fn per_step_invariants(spec in gen_spec(), (eps, delta, kappa, seed) in config()) {
        let h = generate_hypergraph(&spec).unwrap();
        let cfg = SparsifierConfig::new(eps, delta, spec.rank.max()).with_kappa(kappa).with_seed(seed);
        let out = run(h.n, h.edges.iter().cloned().map(Ok), &cfg).unwrap();

        prop_assert!(potential_check(&out.records, out.summary.c).pass);
        prop_assert!(size_bound_check(&out.summary).pass);
        let mut w = 0.0;
        for (rec, e) in out.records.iter().zip(&h.edges) {
            w += e.weight();
            prop_assert!(rec.p > 0.0 && rec.p <= 1.0);
            prop_assert!((rec.cum_weight - w).abs() <= 1e-12 * w);
        }
        for s in &out.sampled {
            prop_assert!(out.records[s.step - 1].sampled);
            prop_assert_eq!(s.new_weight, s.edge.weight() / s.p);
            prop_assert_eq!(&s.edge, &h.edges[s.step - 1]);
        }
        prop_assert_eq!(out.sampled.len(), out.records.iter().filter(|r| r.sampled).count());
    }

    #[test]
    fn identical_inputs_give_identical_runs(spec in gen_spec(), (eps, delta, kappa, seed) in config()) {
        let text = generate(&spec).unwrap();
        let cfg = SparsifierConfig::new(eps, delta, spec.rank.max()).with_kappa(kappa).with_seed(seed);
        let go = || {
            let (hdr, edges) = parse_stream(text.as_bytes()).unwrap();
            run(hdr.n, edges, &cfg).unwrap()
        };
        let (a, b) = (go(), go());
        prop_assert_eq!(a.records, b.records);
        prop_assert_eq!(a.sampled, b.sampled);
    }
}
