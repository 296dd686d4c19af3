"""Plain-text MDP files.

Format::

    mdp <n_states> <n_actions>
    r <s> <a> <value>          # one per (s, a); missing rewards are 0
    p <s> <a> <s'> <prob>      # nonzero transitions only

``#`` starts a comment. Missing transition rows stay all-zero and are
rejected by validation.
"""
from __future__ import annotations

import numpy as np

from .mdp import InvalidMdpError, TabularMdp, validate


class MdpFormatError(ValueError):
    pass


def parse_mdp(text: str, name: str = "") -> TabularMdp:
    P = r = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "mdp":
                if P is not None:
                    raise MdpFormatError("duplicate header")
                n_s, n_a = int(tok[1]), int(tok[2])
                if len(tok) != 3 or n_s < 1 or n_a < 1:
                    raise MdpFormatError("bad header")
                P = np.zeros((n_s, n_a, n_s))
                r = np.zeros((n_s, n_a))
            elif P is None:
                raise MdpFormatError("missing 'mdp' header")
            elif tok[0] == "r" and len(tok) == 4:
                r[_index(tok[1]), _index(tok[2])] = float(tok[3])
            elif tok[0] == "p" and len(tok) == 5:
                P[_index(tok[1]), _index(tok[2]), _index(tok[3])] = float(tok[4])
            else:
                raise MdpFormatError(f"unrecognised line {line!r}")
        except (IndexError, ValueError) as exc:
            raise MdpFormatError(f"line {lineno}: {exc}") from None
    if P is None:
        raise MdpFormatError("missing 'mdp' header")
    problems = validate(P, r)
    if problems:
        raise InvalidMdpError(problems)
    return TabularMdp(P, r, name=name)


def _index(tok):
    i = int(tok)
    if i < 0:
        raise IndexError(f"negative index {i}")
    return i


def format_mdp(mdp: TabularMdp, comment: str = "") -> str:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"mdp {mdp.n_states} {mdp.n_actions}")
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            lines.append(f"r {s} {a} {float(mdp.rewards[s, a])!r}")
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            for t in np.nonzero(mdp.transitions[s, a])[0]:
                lines.append(f"p {s} {a} {t} {float(mdp.transitions[s, a, t])!r}")
    return "\n".join(lines) + "\n"


def read_mdp(path) -> TabularMdp:
    with open(path) as fh:
        return parse_mdp(fh.read(), name=str(path))


def write_mdp(mdp: TabularMdp, path, comment: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(format_mdp(mdp, comment))
