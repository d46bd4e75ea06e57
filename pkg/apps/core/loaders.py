"""
Leitura do arquivo de entrada único (modelo + partição + plano + evidência).

Formato JSON:

    {
      "model": {"variables": [...], "edges": [...], "intercepts": {...},
                "disturbances": {...}},
      "partition": {"treatments": ["X"], "plan_f": [...], "plan_w": [...],
                    "response": "Y"},
      "plan": {"x": {"X": 2.0}, "a": [[...]], "b": [[...]], "noise_cov": [[...]]},
      "evidence": {"point": {"W": 1.0}, "box": {"Y": ["-inf", 0]}}
                  | {"moments": {"mean": [...], "cov": [[...]]}},
      "tabular": {...}, "region": [...], "y": ...
    }

As chaves do modelo também podem vir no nível superior.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from apps.core.exceptions import ModelValidationError
from apps.core.structures import ControlPlan, Evidence, LinearSem, Partition, make_partition, validate_model
from apps.core.utils import as_mapping, as_names

logger = logging.getLogger(__name__)

MODEL_KEYS = ('variables', 'edges', 'intercepts', 'disturbances')


@dataclass(frozen=True)
class RunInput:
    """Conteúdo já validado de um arquivo de entrada; blocos ausentes ficam None."""
    raw: Dict[str, Any]
    sem: Optional[LinearSem] = None
    partition: Optional[Partition] = None
    plan: Optional[ControlPlan] = None
    evidence: Evidence = field(default_factory=Evidence.none)

    @property
    def tabular(self) -> Optional[Mapping[str, Any]]:
        return self.raw.get('tabular')

    def require_partition(self) -> Partition:
        if self.partition is None:
            raise ModelValidationError('MalformedInput', 'Arquivo sem bloco partition', 'partition')
        return self.partition

    def require_plan(self) -> ControlPlan:
        if self.plan is None:
            raise ModelValidationError('MalformedInput', 'Arquivo sem bloco plan', 'plan')
        return self.plan


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    """Lê um JSON; arquivo ausente ou inválido vira MalformedInput com o caminho."""
    path = Path(path)
    try:
        with path.open(encoding='utf-8') as handle:
            data = json.load(handle)
    except FileNotFoundError:
        raise ModelValidationError('MalformedInput', 'Arquivo não encontrado', str(path))
    except json.JSONDecodeError as exc:
        raise ModelValidationError('MalformedInput', f'JSON inválido: {exc.msg} (linha {exc.lineno})', str(path))
    if not isinstance(data, dict):
        raise ModelValidationError('MalformedInput', 'O arquivo precisa conter um objeto JSON', str(path))
    return data


def model_block(raw: Mapping[str, Any]) -> Optional[Mapping[str, Any]]:
    if 'model' in raw:
        return raw['model']
    if 'variables' in raw:
        return {key: raw[key] for key in MODEL_KEYS if key in raw}
    return None


def build_partition(sem: LinearSem, block: Mapping[str, Any]) -> Partition:
    if not isinstance(block, Mapping):
        raise ModelValidationError('MalformedInput', 'partition precisa ser um objeto', 'partition')
    response = block.get('response')
    if not isinstance(response, str):
        raise ModelValidationError('MalformedInput', 'partition.response é obrigatório', 'partition.response')
    return make_partition(
        sem,
        x_names=as_names(block.get('treatments'), 'partition.treatments'),
        f_names=as_names(block.get('plan_f'), 'partition.plan_f'),
        w_names=as_names(block.get('plan_w'), 'partition.plan_w'),
        y_name=response,
    )


def build_plan(part: Partition, block: Mapping[str, Any]) -> ControlPlan:
    """``x`` aceita {tratamento: valor} ou lista na ordem dos tratamentos."""
    if not isinstance(block, Mapping):
        raise ModelValidationError('MalformedInput', 'plan precisa ser um objeto', 'plan')
    x_value = block.get('x')
    if isinstance(x_value, Mapping):
        names = part.labels(part.x_idx)
        unknown = set(x_value) - set(names)
        if unknown:
            raise ModelValidationError('UnknownVariable', 'plan.x cita variável que não é tratamento', sorted(unknown)[0])
        missing = [name for name in names if name not in x_value]
        if missing:
            raise ModelValidationError('MalformedInput', 'plan.x sem valor para o tratamento', missing[0])
        x_value = [x_value[name] for name in names]
    if x_value is None:
        raise ModelValidationError('MalformedInput', 'plan.x é obrigatório', 'plan.x')
    return ControlPlan.build(part, x_value, block.get('a'), block.get('b'), block.get('noise_cov'))


def build_evidence(sem: LinearSem, block: Optional[Mapping[str, Any]]) -> Evidence:
    if not block:
        return Evidence.none()
    if not isinstance(block, Mapping):
        raise ModelValidationError('MalformedInput', 'evidence precisa ser um objeto', 'evidence')
    if 'moments' in block:
        moments = as_mapping(block['moments'], 'evidence.moments')
        return Evidence.user_moments(sem, moments.get('mean'), moments.get('cov'))
    return Evidence.from_blocks(sem, point=block.get('point'), box=block.get('box'))


def parse_input(raw: Dict[str, Any]) -> RunInput:
    """Valida os blocos presentes, na ordem de dependência."""
    spec = model_block(raw)
    if spec is None:
        return RunInput(raw=raw)
    sem = validate_model(spec)
    partition = build_partition(sem, raw['partition']) if raw.get('partition') else None
    plan = build_plan(partition, raw['plan']) if partition is not None and raw.get('plan') else None
    evidence = build_evidence(sem, raw.get('evidence'))
    return RunInput(raw=raw, sem=sem, partition=partition, plan=plan, evidence=evidence)


def load_input(path: Union[str, Path]) -> RunInput:
    """
    Carrega e valida o arquivo de entrada.

    Raises:
        ModelValidationError: arquivo ausente, JSON inválido ou blocos inválidos
    """
    logger.debug(f'Lendo entrada de {path}')
    return parse_input(read_json(path))
