use std::io::Write;

use hypersparse::{generate, GenSpec, Model, RankDist, WeightDist};

use crate::args::{GenArgs, ModelArg, RankDistArg};
use crate::error::{CliError, CliResult};

pub fn spec_from_args(args: &GenArgs) -> GenSpec {
    let rank = match args.rank_dist {
        RankDistArg::Fixed => RankDist::Fixed(args.rank),
        RankDistArg::Uniform => RankDist::Uniform(args.rank),
    };
    let weights = match (args.weight, args.wmin, args.wmax) {
        (Some(w), _, _) => WeightDist::Constant(w),
        (None, Some(min), Some(max)) => WeightDist::LogUniform { min, max },
        _ => WeightDist::Constant(1.0),
    };
    let model = match args.model {
        ModelArg::Uniform => Model::UniformSubsets,
        ModelArg::Planted => Model::PlantedClusters { blocks: args.blocks },
        ModelArg::Graph => Model::GraphOnly,
    };
    GenSpec {
        n: args.n,
        m: args.m,
        rank,
        weights,
        model,
        seed: args.seed,
    }
}

pub fn run(args: &GenArgs) -> CliResult<()> {
    let text = generate(&spec_from_args(args)).map_err(CliError::core("invalid generator spec"))?;
    match &args.output {
        Some(path) => std::fs::write(path, text).map_err(CliError::file(path)),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(CliError::file("<stdout>")),
    }
}
