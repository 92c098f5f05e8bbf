#!/usr/bin/python
# -*- coding:utf-8 -*-
"""Dense helpers for operators that act on a few qubits of a larger register."""
import functools
from typing import Sequence

import numpy as np

_KET_BRA = {
    (0, 0): np.array([[1, 0], [0, 0]], dtype=complex),
    (0, 1): np.array([[0, 1], [0, 0]], dtype=complex),
    (1, 0): np.array([[0, 0], [1, 0]], dtype=complex),
    (1, 1): np.array([[0, 0], [0, 1]], dtype=complex),
}


def outer_bits(ket: Sequence[int], bra: Sequence[int]) -> np.ndarray:
    """|ket⟩⟨bra| for two equal-length bit strings (first bit most significant)"""
    if len(ket) != len(bra):
        raise ValueError("ket and bra lengths differ")
    if not ket:
        return np.ones((1, 1), dtype=complex)
    return functools.reduce(np.kron, [_KET_BRA[(int(k), int(b))] for k, b in zip(ket, bra)])


def projector_bits(bits: Sequence[int]) -> np.ndarray:
    return outer_bits(bits, bits)


def embed_operator(block: np.ndarray, support: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """
    Lift a block on `support` to the register listed in `order` (a superset)

    Args:
        block (np.ndarray): 2^s x 2^s matrix, support[0] most significant
        support (Sequence[int]): Qubit labels the block acts on
        order (Sequence[int]): Qubit labels of the target register, most significant first

    Returns:
        np.ndarray: 2^len(order) square matrix
    """
    support, order = list(support), list(order)
    rest = [q for q in order if q not in support]
    if len(rest) + len(support) != len(order):
        raise ValueError(f"support {support} is not inside {order}")
    full = np.kron(block, np.eye(1 << len(rest), dtype=complex))
    n = len(order)
    current = support + rest
    perm = [current.index(q) for q in order]
    tensor = full.reshape((2,) * (2 * n))
    tensor = tensor.transpose(perm + [p + n for p in perm])
    return tensor.reshape(1 << n, 1 << n)


def apply_block(psi: np.ndarray, block: np.ndarray, support: Sequence[int], width: int) -> np.ndarray:
    """
    block ⊗ I applied to a dense state without forming the full matrix

    Args:
        psi (np.ndarray): 2^width amplitudes (any trailing batch axis is not supported)
        block (np.ndarray): 2^s x 2^s matrix
        support (Sequence[int]): Qubits the block acts on
        width (int): Register size

    Returns:
        np.ndarray: New 2^width vector
    """
    s = len(support)
    if s == 0:
        return block[0, 0] * psi
    tensor = psi.reshape((2,) * width)
    op = block.reshape((2,) * (2 * s))
    moved = np.tensordot(op, tensor, axes=(list(range(s, 2 * s)), list(support)))
    return np.moveaxis(moved, list(range(s)), list(support)).reshape(-1)


def basis_bits(width: int) -> np.ndarray:
    """All 2^width basis strings as a (2^width, width) 0/1 array, row i = bin(i)"""
    idx = np.arange(1 << width, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)
