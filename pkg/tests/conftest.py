import numpy as np
import pytest

from motionseq import dataio
from motionseq.config import H36M_ACTIONS


def write_fake_dataset(root, actions=("walking", "eating"), subjects=(1, 5),
                       trials=(1, 2), n_raw_frames=300, seed=0):
    """A small directory tree in the 99-column sequence format.

    Columns: 6 global dims that drift slowly, then 93 joint dims of which a
    fixed set of 39 hold exactly-representable constants, leaving 54 varying
    joint angles as on the real data.
    """
    rng = np.random.default_rng(seed)
    joint_dims = 93
    constant_idx = np.arange(0, joint_dims, 12)          # 8 indices
    constant_idx = np.concatenate([constant_idx, np.arange(1, joint_dims, 3)])
    constant_idx = np.unique(constant_idx)[:39]
    constants = np.resize([0.5, -0.25, 0.75, -0.5], 39)  # exact binary values
    t = np.arange(n_raw_frames)[:, None] * 0.02
    for subject in subjects:
        subject_dir = root / f"S{subject}"
        subject_dir.mkdir(parents=True, exist_ok=True)
        for action in actions:
            for trial in trials:
                global_part = 0.05 * t * rng.uniform(0.5, 1.5, size=6)
                freqs = rng.uniform(0.2, 0.8, size=joint_dims)
                phases = rng.uniform(0, 2 * np.pi, size=joint_dims)
                joints = 0.5 * np.sin(2 * np.pi * freqs * t + phases)
                joints[:, constant_idx] = constants
                frames = np.hstack([global_part, joints])
                dataio.write_sequence(frames,
                                      subject_dir / f"{action}_{trial}.txt")
    return root


@pytest.fixture(scope="session")
def fake_data_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("angles")
    return write_fake_dataset(root)


@pytest.fixture(scope="session")
def fake_all_actions_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("angles_all")
    return write_fake_dataset(root, actions=H36M_ACTIONS, trials=(1,),
                              n_raw_frames=160, seed=3)
