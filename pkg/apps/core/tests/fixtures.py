"""
Modelos de teste compartilhados.

Cada fixture é o dicionário de entrada (mesmo formato do arquivo JSON da
linha de comando) e os helpers constroem os tipos validados.
"""

import json
import os
import tempfile
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from apps.core.loaders import parse_input
from apps.core.structures import ControlPlan, LinearSem, Partition, make_partition, validate_model


def _edges(*triples) -> List[Dict[str, Any]]:
    return [{'from': source, 'to': target, 'coeff': coeff} for source, target, coeff in triples]


def _unit(*names) -> Dict[str, Any]:
    return {'var': {name: 1.0 for name in names}}


def chain_spec() -> Dict[str, Any]:
    """W -> X (0.5), X -> Y (2), W -> Y (1), distúrbios unitários."""
    return {
        'variables': ['W', 'X', 'Y'],
        'edges': _edges(('W', 'X', 0.5), ('X', 'Y', 2.0), ('W', 'Y', 1.0)),
        'disturbances': _unit('W', 'X', 'Y'),
    }


def feedback_spec(forward: float, backward: float) -> Dict[str, Any]:
    """Par X <-> Y com coeficientes X -> Y e Y -> X."""
    return {
        'variables': ['X', 'Y'],
        'edges': _edges(('X', 'Y', forward), ('Y', 'X', backward)),
        'disturbances': _unit('X', 'Y'),
    }


def loop_in_s_spec() -> Dict[str, Any]:
    """X -> Y (0.5) com o laço Y <-> M (0.4, 0.5) inteiro dentro de S."""
    return {
        'variables': ['X', 'Y', 'M'],
        'edges': _edges(('X', 'Y', 0.5), ('Y', 'M', 0.4), ('M', 'Y', 0.5)),
        'disturbances': _unit('X', 'Y', 'M'),
    }


def mediated_spec() -> Dict[str, Any]:
    """W -> X, X -> F -> Y, X -> Y, W -> Y, Z -> W; Y fica em U quando F é entrada do plano."""
    return {
        'variables': ['Z', 'W', 'X', 'F', 'Y'],
        'edges': _edges(
            ('Z', 'W', 0.7), ('W', 'X', 0.6), ('X', 'F', 0.8), ('F', 'Y', 0.5),
            ('X', 'Y', 0.3), ('W', 'Y', 0.4), ('W', 'F', -0.2),
        ),
        'intercepts': {'Z': 0.5, 'W': -0.3, 'X': 1.0, 'F': 0.2, 'Y': 2.0},
        'disturbances': {
            'var': {'Z': 1.0, 'W': 0.8, 'X': 1.2, 'F': 0.6, 'Y': 0.9},
            'cov_pairs': [{'a': 'F', 'b': 'Y', 'value': 0.2}],
        },
    }


def two_treatment_spec() -> Dict[str, Any]:
    """X1 -> F -> Y, X2 -> Y, W confunde os dois tratamentos e a resposta."""
    return {
        'variables': ['W', 'X1', 'X2', 'F', 'Y'],
        'edges': _edges(
            ('W', 'X1', 0.5), ('W', 'X2', -0.4), ('W', 'Y', 0.7),
            ('X1', 'F', 1.0), ('F', 'Y', 0.6), ('X2', 'Y', 0.8), ('X2', 'F', 0.3),
        ),
        'intercepts': {'W': 1.0, 'Y': -0.5},
        'disturbances': _unit('W', 'X1', 'X2', 'F', 'Y'),
    }


def inert_treatment_spec() -> Dict[str, Any]:
    """Dois tratamentos, X2 sem efeito em Y (X2 -> D apenas)."""
    return {
        'variables': ['W', 'X1', 'X2', 'Y', 'D'],
        'edges': _edges(('W', 'X1', 0.5), ('X1', 'Y', 1.5), ('W', 'Y', 1.0), ('X2', 'D', 1.0)),
        'disturbances': _unit('W', 'X1', 'X2', 'Y', 'D'),
    }


def cancelling_spec() -> Dict[str, Any]:
    """X -> Y (1) e X -> F -> Y (1, -1): efeito total nulo de X em Y."""
    return {
        'variables': ['W', 'X', 'F', 'Y'],
        'edges': _edges(('W', 'X', 0.5), ('X', 'F', 1.0), ('F', 'Y', -1.0), ('X', 'Y', 1.0), ('W', 'Y', 0.5)),
        'disturbances': _unit('W', 'X', 'F', 'Y'),
    }


# Frota: (nome, especificação, tratamentos, F, W, resposta).
FleetEntry = Tuple[str, Dict[str, Any], List[str], List[str], List[str], str]


def fleet() -> List[FleetEntry]:
    """Cadeias, garfos, pares confundidos e ciclos."""
    fork = {
        'variables': ['W', 'X', 'A', 'B'],
        'edges': _edges(('W', 'X', 0.9), ('X', 'A', 1.2), ('X', 'B', -0.7), ('W', 'B', 0.4)),
        'intercepts': {'A': 1.0, 'B': -1.0},
        'disturbances': _unit('W', 'X', 'A', 'B'),
    }
    confounded = {
        'variables': ['X', 'Y'],
        'edges': _edges(('X', 'Y', 1.5)),
        'intercepts': {'X': 0.3, 'Y': 0.1},
        'disturbances': {'var': {'X': 1.0, 'Y': 2.0}, 'cov_pairs': [{'a': 'X', 'b': 'Y', 'value': 0.6}]},
    }
    long_chain = {
        'variables': ['W', 'X', 'M1', 'M2', 'Y'],
        'edges': _edges(('W', 'X', 0.4), ('X', 'M1', 0.9), ('M1', 'M2', -0.8), ('M2', 'Y', 0.7), ('W', 'Y', 0.3)),
        'intercepts': {'M1': 0.5, 'Y': 1.0},
        'disturbances': _unit('W', 'X', 'M1', 'M2', 'Y'),
    }
    diamond = {
        'variables': ['W', 'X', 'A', 'B', 'Y'],
        'edges': _edges(('W', 'X', 0.3), ('X', 'A', 0.5), ('X', 'B', 0.7), ('A', 'Y', 1.1), ('B', 'Y', -0.4), ('W', 'A', 0.2)),
        'disturbances': _unit('W', 'X', 'A', 'B', 'Y'),
    }
    return [
        ('chain', chain_spec(), ['X'], [], ['W'], 'Y'),
        ('chain_f', chain_spec(), ['X'], ['Y'], [], 'Y'),
        ('fork', fork, ['X'], ['A'], ['W'], 'B'),
        ('confounded', confounded, ['X'], [], [], 'Y'),
        ('feedback', feedback_spec(0.5, 0.5), ['X'], [], [], 'Y'),
        ('loop_in_s', loop_in_s_spec(), ['X'], ['M'], [], 'Y'),
        ('mediated', mediated_spec(), ['X'], ['F'], ['W'], 'Y'),
        ('mediated_yf', mediated_spec(), ['X'], ['Y'], ['W', 'Z'], 'Y'),
        ('two_treatments', two_treatment_spec(), ['X1', 'X2'], ['F'], ['W'], 'Y'),
        ('long_chain', long_chain, ['X'], ['M2'], ['W'], 'Y'),
        ('diamond', diamond, ['X'], ['A'], ['W'], 'Y'),
    ]


def build(spec: Dict[str, Any], x: List[str], f: List[str], w: List[str], y: str) -> Tuple[LinearSem, Partition]:
    sem = validate_model(spec)
    return sem, make_partition(sem, x, f, w, y)


def chain() -> Tuple[LinearSem, Partition]:
    return build(chain_spec(), ['X'], [], ['W'], 'Y')


def plan_for(part: Partition, x_value: float = 1.0, gain: float = 0.0, noise: float = 0.0, b: float = 0.0) -> ControlPlan:
    """Plano com x constante, a = gain, b = b e Psi* = noise * I em todos os blocos."""
    return ControlPlan.build(
        part,
        [x_value] * part.n_x,
        gain_f=np.full((part.n_x, part.n_f), gain),
        gain_w=np.full((part.n_x, part.n_w), b),
        noise_cov=noise * np.eye(part.n_x),
    )


def input_document(
    spec: Dict[str, Any],
    x: Optional[List[str]] = None,
    f: Optional[List[str]] = None,
    w: Optional[List[str]] = None,
    y: Optional[str] = None,
    plan: Optional[Dict[str, Any]] = None,
    evidence: Optional[Dict[str, Any]] = None,
    **extra: Any,
) -> Dict[str, Any]:
    document: Dict[str, Any] = {'model': spec}
    if x is not None:
        document['partition'] = {'treatments': x, 'plan_f': f or [], 'plan_w': w or [], 'response': y}
    if plan is not None:
        document['plan'] = plan
    if evidence is not None:
        document['evidence'] = evidence
    document.update(extra)
    return document


class InputFiles:
    """Diretório temporário para arquivos de entrada da linha de comando."""

    def __init__(self):
        self._tmp = tempfile.TemporaryDirectory()

    def write(self, name: str, document: Dict[str, Any]) -> str:
        path = os.path.join(self._tmp.name, name)
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(document, handle)
        return path

    def path(self, name: str) -> str:
        return os.path.join(self._tmp.name, name)

    def cleanup(self) -> None:
        self._tmp.cleanup()


def parsed(document: Dict[str, Any]):
    return parse_input(document)


def tabular_binary(pr_x1=(0.2, 0.8), pr_y1=((0.3, 0.6), (0.5, 0.9)), pr_pa1: float = 0.5) -> Dict[str, Any]:
    """
    pa, X, Y binários. ``pr_y1[pa][x]`` é pr(Y=1 | x, pa) e ``pr_x1[pa]`` é pr(X=1 | pa).
    """
    return {
        'treatment': {'name': 'X', 'domain': [0, 1]},
        'response': {'name': 'Y', 'domain': [0, 1]},
        'parents': [{'name': 'P', 'domain': [0, 1]}],
        'pr_pa': {'0': 1.0 - pr_pa1, '1': pr_pa1},
        'pr_x_given_pa': {str(p): [1.0 - pr_x1[p], pr_x1[p]] for p in (0, 1)},
        'pr_y_given_x_pa': {
            f'{x}|{p}': [1.0 - pr_y1[p][x], pr_y1[p][x]] for p in (0, 1) for x in (0, 1)
        },
    }


def tabular_three_valued() -> Dict[str, Any]:
    """X com três valores e dois pais binários."""
    pr_x = {
        '0,0': [0.5, 0.3, 0.2], '0,1': [0.1, 0.6, 0.3],
        '1,0': [0.25, 0.25, 0.5], '1,1': [0.7, 0.2, 0.1],
    }
    pr_y = {}
    for p, key in enumerate(pr_x):
        for x in ('a', 'b', 'c'):
            offset = 0.1 * p + {'a': 0.05, 'b': 0.2, 'c': 0.35}[x]
            pr_y[f'{x}|{key}'] = [offset, 0.3, 0.7 - offset]
    return {
        'treatment': {'name': 'X', 'domain': ['a', 'b', 'c']},
        'response': {'name': 'Y', 'domain': ['lo', 'mid', 'hi']},
        'parents': [{'name': 'P1', 'domain': [0, 1]}, {'name': 'P2', 'domain': [0, 1]}],
        'pr_pa': {'0,0': 0.1, '0,1': 0.2, '1,0': 0.3, '1,1': 0.4},
        'pr_x_given_pa': pr_x,
        'pr_y_given_x_pa': pr_y,
    }
