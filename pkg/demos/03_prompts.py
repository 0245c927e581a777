"""Render link-prediction prompts under a hard token budget.

A prompt is three kinds of line: a question, the source description, and
one description per candidate. Descriptions embed each node's text plus
its anchors in importance order, tagged with type identifiers. When the
budget pinches, anchor tails are dropped (candidates first) rather than
ever emitting an oversized prompt.
"""

from lpnl import PromptConfig, build_prompt, estimate_tokens, top_k_anchors, SamplerConfig
from lpnl.prompts import BudgetUnsatisfiableError
from lpnl.synth import SynthSpec, make_academic_graph

g = make_academic_graph(SynthSpec(n_topics=10, papers_per_topic=80, authors_per_topic=40))
paper = g.id_of("p2_4")
truth = g.neighbors(paper, "authored_by")[0]
decoys = [g.id_of("a7_0"), g.id_of("a8_3")]
candidates = [decoys[0], truth, decoys[1]]

sampler_cfg = SamplerConfig(hops=2, layer_budget=8, anchor_k=10, rng_seed=0)
anchors = {v: top_k_anchors(g, v, sampler_cfg) for v in [paper, *candidates]}

prompt_cfg = PromptConfig(
    token_budget=1024,
    question_templates={
        "authored_by": "Which following candidate {target_type} writes the {source_type} {source_alias}?"
    },
)
bundle = build_prompt(paper, "authored_by", candidates, anchors, g, prompt_cfg)
print(f"token_count={bundle.token_count} (budget {prompt_cfg.token_budget})")
print(f"candidate aliases: {bundle.candidate_aliases}\n")
print(bundle.text)

# squeeze the budget and watch anchors drop off, never the budget breached
for budget in (512, 256, 128, 64):
    try:
        squeezed = build_prompt(
            paper, "authored_by", candidates, anchors, g,
            PromptConfig(token_budget=budget, question_templates=prompt_cfg.question_templates),
        )
        print(f"budget {budget:>5}: emitted {squeezed.token_count} tokens")
    except BudgetUnsatisfiableError as exc:
        print(f"budget {budget:>5}: refused (needs at least {exc.needed})")

print("\nwhitespace estimate of the full prompt:",
      estimate_tokens(bundle.text, PromptConfig(token_estimator="whitespace")))
