"""Shared generators and independent oracles for the test suite."""

from __future__ import annotations

import random

from chainlogic import logic, prompts, traces

VARIABLES = ("A", "B", "C", "D", "E", "F")


def random_expr(rng: random.Random, max_depth: int = 4, variables=VARIABLES) -> logic.Expr:
    if max_depth <= 0:
        return logic.Var(rng.choice(variables))
    kind = rng.randrange(4)
    if kind == 0:
        return logic.Var(rng.choice(variables))
    if kind == 1:
        return logic.Not(random_expr(rng, max_depth - 1, variables))
    children = tuple(random_expr(rng, max_depth - 1, variables) for _ in range(rng.randint(2, 3)))
    return logic.And(children) if kind == 2 else logic.Or(children)


def random_assignment(rng: random.Random, expr: logic.Expr) -> dict[str, bool]:
    return {name: rng.random() < 0.5 for name in logic.variables(expr)}


def python_eval(expr_text: str, assignment: dict[str, bool]) -> bool:
    """Independent oracle: our rendered syntax is valid Python given true/false names."""
    scope = {name: bool(value) for name, value in assignment.items()}
    scope.update({"true": True, "false": False})
    return bool(eval(expr_text, {"__builtins__": {}}, scope))  # noqa: S307


def random_trace(rng: random.Random, max_depth: int = 3) -> traces.ReasoningTrace:
    """A complete, faithful trace over a random expression."""
    expr = random_expr(rng, max_depth)
    assignment = random_assignment(rng, expr)
    names = logic.variables(expr)
    return traces.ReasoningTrace(
        elements=tuple((name, f"condition {name.lower()} holds") for name in names),
        expression_text=logic.render(expr),
        expression=expr,
        qa=tuple(
            traces.QaStep(
                name,
                f"Is condition {name} satisfied?",
                f"The facts establish condition {name}.",
                assignment[name],
            )
            for name in names
        ),
        recomposition_text=logic.substitute(expr, assignment),
        model_final=logic.evaluate(expr, assignment),
    )


DJ_ELEMENTS = (
    ("A", "complete diversity between plaintiffs and defendants"),
    ("B", "the amount-in-controversy (AiC) is greater than $75k"),
)


def dj_chain_response(complete_diversity: bool, aic_satisfied: bool, final: bool | None = None) -> str:
    """Canonical chain-of-logic output for a diversity-jurisdiction sample."""
    chain = prompts.ChainSolution(
        elements=DJ_ELEMENTS,
        expression="(A and B)",
        qa=(
            traces.QaStep(
                "A",
                "Is there complete diversity between plaintiffs and defendants?",
                "Compare the parties' states of citizenship.",
                complete_diversity,
            ),
            traces.QaStep(
                "B",
                "Is the amount-in-controversy greater than $75k?",
                "Total the claims between each plaintiff and defendant.",
                aic_satisfied,
            ),
        ),
        final=(complete_diversity and aic_satisfied) if final is None else final,
    )
    return traces.render_trace(chain.trace())
