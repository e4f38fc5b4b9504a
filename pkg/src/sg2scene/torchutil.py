"""Torch plumbing shared by the trainable modules."""

from __future__ import annotations

import numpy as np
import torch


class TrainingDiverged(RuntimeError):
    """Non-finite loss encountered; carries the offending step index."""

    def __init__(self, step: int, message: str = ""):
        super().__init__(message or f"training diverged at step {step} (non-finite loss)")
        self.step = step


def set_determinism(seed: int, deterministic: bool = False) -> None:
    """Seed torch; under the determinism flag also pin algorithms and threads."""
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)


def stable_mean(x: torch.Tensor, order_insensitive: bool = False) -> torch.Tensor:
    """Mean of all elements; sorts first when the reduction must not depend
    on input order (makes batch-shuffle invariance exact, not just approximate)."""
    flat = x.reshape(-1)
    if order_insensitive:
        flat = torch.sort(flat).values
    return flat.mean()


def state_dict_arrays(module: torch.nn.Module) -> dict[str, np.ndarray]:
    return {name: tensor.detach().cpu().numpy().astype(np.float32) for name, tensor in module.state_dict().items()}


def load_state_arrays(module: torch.nn.Module, arrays: dict[str, np.ndarray]) -> None:
    state = module.state_dict()
    missing = sorted(set(state) - set(arrays))
    extra = sorted(set(arrays) - set(state))
    if missing or extra:
        raise ValueError(f"checkpoint keys mismatch: missing {missing}, extra {extra}")
    module.load_state_dict(
        {name: torch.as_tensor(arr, dtype=state[name].dtype) for name, arr in arrays.items()}
    )


def batch_indices(n: int, batch_size: int, generator: torch.Generator) -> list[int]:
    """Sample a batch of indices with replacement from a seeded generator."""
    return torch.randint(0, n, (min(batch_size, n),), generator=generator).tolist()
