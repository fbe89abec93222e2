import itertools

import pytest

from sandmil.ingest import (
    Label,
    ResourceType,
    parse_report,
    serialize_sample,
)
from sandmil.similarity import SimilarityConfig, similarity_for_type
from sandmil.synthgen import (
    FamilySpec,
    demo_family_specs,
    demo_labeled_paths,
    demo_name_families,
    generate_corpus,
)


def small_family(name="fam", **overrides):
    base = dict(
        name=name,
        label=Label.MALICIOUS,
        samples=4,
        resources={ResourceType.FILE: ["\\Temp\\{hex8}-{hex4}\\config.dmc"]},
    )
    base.update(overrides)
    return FamilySpec(**base)


class TestGeneration:
    def test_same_seed_is_byte_identical(self):
        families, benign = demo_family_specs(samples_per_family=5, benign_samples=8)
        first = "\n".join(serialize_sample(s) for s in generate_corpus(families, benign, seed=3))
        second = "\n".join(serialize_sample(s) for s in generate_corpus(families, benign, seed=3))
        assert first == second

    def test_different_seeds_differ(self):
        corpus_a = generate_corpus([small_family()], seed=1)
        corpus_b = generate_corpus([small_family()], seed=2)
        names_a = {i.name for s in corpus_a for i in s.instances}
        names_b = {i.name for s in corpus_b for i in s.instances}
        assert names_a != names_b

    def test_valid_against_report_schema(self):
        families, benign = demo_family_specs(samples_per_family=3, benign_samples=5)
        for sample in generate_corpus(families, benign, seed=0):
            assert parse_report(serialize_sample(sample)) == sample

    def test_timestamps_span_declared_range(self):
        spec = small_family(samples=5)
        corpus = generate_corpus([spec], seed=0)
        times = sorted(s.collected_at for s in corpus)
        assert times[0] == spec.start
        assert times[-1] == spec.end

    def test_unknown_placeholder_rejected(self):
        with pytest.raises(ValueError):
            small_family(resources={ResourceType.FILE: ["\\Temp\\{bogus}\\x"]})

    def test_unique_sample_ids(self):
        families, benign = demo_family_specs(samples_per_family=4, benign_samples=6)
        corpus = generate_corpus(families, benign, seed=0)
        assert len({s.sample_id for s in corpus}) == len(corpus)


class TestSimilarityStructure:
    def test_randomized_folder_keeps_family_similar(self):
        corpus = generate_corpus([small_family(samples=2)], seed=5)
        sim = similarity_for_type("file", SimilarityConfig())
        name_a = next(iter(corpus[0].names_of_type(ResourceType.FILE)))
        name_b = next(iter(corpus[1].names_of_type(ResourceType.FILE)))
        assert name_a != name_b
        assert sim(name_a, name_b) > 0.9

    def test_disjoint_skeletons_stay_dissimilar(self):
        alpha = small_family(
            "alpha", resources={ResourceType.FILE: ["\\Temp\\{hex8}\\alphaload.bin"]}
        )
        beta = small_family(
            "beta", resources={ResourceType.FILE: ["\\Windows\\{hex8}\\betadrv.sys"]}
        )
        corpus = generate_corpus([alpha, beta], seed=6)
        sim = similarity_for_type("file", SimilarityConfig())
        alpha_names = [
            n for s in corpus if s.sample_id.startswith("alpha")
            for n in s.names_of_type(ResourceType.FILE)
        ]
        beta_names = [
            n for s in corpus if s.sample_id.startswith("beta")
            for n in s.names_of_type(ResourceType.FILE)
        ]
        worst = max(sim(a, b) for a in alpha_names for b in beta_names)
        assert worst < 0.4

    def test_name_families_have_clean_gap(self):
        families = demo_name_families(per_family=25, n_families=6, seed=4)
        sim = similarity_for_type("registry", SimilarityConfig())
        intra_min = 1.0
        for members in families.values():
            for a, b in itertools.combinations(members[:12], 2):
                intra_min = min(intra_min, sim(a, b))
        cross_max = 0.0
        for fam_a, fam_b in itertools.combinations(families, 2):
            for a in families[fam_a][:8]:
                for b in families[fam_b][:8]:
                    cross_max = max(cross_max, sim(a, b))
        assert intra_min > 0.4
        assert cross_max < 0.4

    def test_labeled_paths_differ_only_in_known_folders(self):
        paths, classes = demo_labeled_paths(per_class=10, seed=0)
        assert len(paths) == 20 and set(classes) == {0, 1}
        for path, cls in zip(paths, classes):
            root = path.split("\\")[1].lower()
            assert root == ("windows" if cls == 0 else "temp")


class TestBenignFamilyGap:
    def test_demo_benign_never_looks_like_a_family(self):
        families, benign = demo_family_specs(samples_per_family=4, benign_samples=15)
        corpus = generate_corpus(families, benign, seed=8)
        cfg = SimilarityConfig()
        by_label = {"malicious": [], "legitimate": []}
        for s in corpus:
            by_label[s.label.value].append(s)
        for rtype in ResourceType:
            sim = similarity_for_type(rtype.value, cfg)
            bad = {n for s in by_label["malicious"][:20] for n in s.names_of_type(rtype)}
            good = {n for s in by_label["legitimate"] for n in s.names_of_type(rtype)}
            worst = max(sim(a, b) for a in bad for b in good)
            assert worst < 0.4, (rtype, worst)
