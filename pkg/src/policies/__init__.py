"""Relay-selection policies, looked up by their config names"""

from typing import Optional, Sequence, Union

from ..core.model import PolicyName
from ..core.whittle import IndexTable
from .base_policy import BasePolicy, PolicyContext
from .baseline_policies import LoadBasedPolicy, MLRSPolicy, MMRSPolicy, RandomPolicy
from .whittle_policy import WhittlePolicy


def make_policy(
    name: Union[str, PolicyName],
    tables: Optional[Sequence[IndexTable]] = None,
) -> BasePolicy:
    policy = name if isinstance(name, PolicyName) else PolicyName.parse(name)
    if policy == PolicyName.RANDOM:
        return RandomPolicy()
    elif policy == PolicyName.LOAD_BASED:
        return LoadBasedPolicy()
    elif policy == PolicyName.MMRS:
        return MMRSPolicy()
    elif policy == PolicyName.MLRS:
        return MLRSPolicy()
    return WhittlePolicy(tables)


__all__ = ["BasePolicy", "PolicyContext", "make_policy"]
