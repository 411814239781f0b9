import pytest

from chordbench.synth import SynthSpec, default_pop_model, emit_dataset


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Six short synthetic tracks with manifest, shared across tests."""
    out = tmp_path_factory.mktemp("tinyset")
    spec = SynthSpec(n_tracks=6, track_length_s=12.0, octaves=(3, 4), seed=71)
    entries = emit_dataset(spec, default_pop_model(), out)
    return out, entries
