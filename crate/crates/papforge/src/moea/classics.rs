//! The four classic algorithms expressed as descriptor instantiations with
//! conventional default parameters.

use super::descriptor::{
    wellknown, Aggregation, AlgorithmDescriptor, ArchivePolicy, Configuration, CrossoverOp,
    HyperparameterDef, InitScheme, MatingSelection, UpdateScheme,
};
use super::ClassicName;

fn base_hyperparameters() -> Vec<HyperparameterDef> {
    vec![
        HyperparameterDef::int(wellknown::POP_SIZE, 100, 10, 300, "population size"),
        HyperparameterDef::float(
            wellknown::CROSSOVER_RATE,
            0.9,
            0.0,
            1.0,
            "probability of applying crossover to a mating pair",
        ),
        HyperparameterDef::float(
            wellknown::MUTATION_RATE,
            0.05,
            0.001,
            0.5,
            "per-bit flip probability",
        ),
    ]
}

/// Builds one of the classic configurations with its default assignment.
pub fn classic_config(name: ClassicName) -> Configuration {
    let mut hyperparameters = base_hyperparameters();
    let (update_scheme, mating_selection, archive) = match name {
        ClassicName::Nsga2 => (
            UpdateScheme::NondominatedSortingCrowding,
            MatingSelection::BinaryTournament,
            ArchivePolicy { enabled: false },
        ),
        ClassicName::Nsga3 => (
            UpdateScheme::ReferenceDirectionNiching,
            MatingSelection::BinaryTournament,
            ArchivePolicy { enabled: false },
        ),
        ClassicName::Moead => {
            hyperparameters.push(HyperparameterDef::int(
                wellknown::NEIGHBORHOOD_SIZE,
                20,
                2,
                50,
                "subproblem neighborhood size",
            ));
            (
                UpdateScheme::Decomposition {
                    aggregation: Aggregation::Tchebycheff,
                },
                MatingSelection::Neighborhood,
                ArchivePolicy { enabled: false },
            )
        }
        ClassicName::Spea2 => {
            hyperparameters.push(HyperparameterDef::int(
                wellknown::ARCHIVE_CAPACITY,
                100,
                10,
                300,
                "external archive capacity",
            ));
            (
                UpdateScheme::StrengthDensityArchive,
                MatingSelection::BinaryTournament,
                ArchivePolicy { enabled: true },
            )
        }
    };
    let descriptor = AlgorithmDescriptor {
        init_scheme: InitScheme::UniformRandom,
        crossover: CrossoverOp::Uniform,
        mating_selection,
        update_scheme,
        archive,
        hyperparameters,
    };
    Configuration::with_defaults(descriptor, name.label())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_structures() {
        let nsga2 = classic_config(ClassicName::Nsga2);
        assert_eq!(
            nsga2.descriptor.update_scheme,
            UpdateScheme::NondominatedSortingCrowding
        );
        let moead = classic_config(ClassicName::Moead);
        assert_eq!(
            moead.descriptor.update_scheme,
            UpdateScheme::Decomposition {
                aggregation: Aggregation::Tchebycheff
            }
        );
        let spea2 = classic_config(ClassicName::Spea2);
        assert!(spea2.descriptor.archive.enabled);
        assert_eq!(
            spea2.descriptor.update_scheme,
            UpdateScheme::StrengthDensityArchive
        );
        let nsga3 = classic_config(ClassicName::Nsga3);
        assert_eq!(
            nsga3.descriptor.update_scheme,
            UpdateScheme::ReferenceDirectionNiching
        );
    }

    #[test]
    fn classics_validate_clean() {
        for name in ClassicName::ALL {
            assert!(classic_config(name).validate().is_empty(), "{name:?}");
        }
    }
}
