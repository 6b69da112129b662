import random
import string

import pytest

from graphcrew.errors import BackendRefusal, NoCodeBlock
from graphcrew.execution import StubExecutor, fail, ok, timed_out
from graphcrew.gateway import UsageLedger
from graphcrew.knowledge import DocEntry, ExperienceEntry, RetrievalResult
from graphcrew.normalize import NormalizedQuestion
from graphcrew.solving import (
    NO_CODE_ERROR,
    NO_OUTPUT_ERROR,
    attempt_with_retries,
    extract_code_block,
    generate_code,
    reason_directly,
)

from conftest import coding_reply, mock_backend

QUESTION = NormalizedQuestion(
    refined_question="Is there a path visiting every node exactly once?",
    graph_type="undirected",
    input_data="Nodes: [0..6], Edges: [0,3],[0,1],[1,6],[2,4],[3,5],[3,6],[4,5]",
    output_format="Yes. The path can be: 1,4,8.",
)

EXPERIENCE = RetrievalResult(
    "experience",
    [
        (
            ExperienceEntry(
                question="Is there a hamiltonian path?",
                answer="Yes. The path can be: 0, 1, 6, 5.",
                thought="This is finding a path through every node.",
                code="def search_paths(graph, path):\n    ...",
                problem_type="hamilton",
            ),
            0.97,
        )
    ],
    0.97,
)


class TestExtractCodeBlock:
    def test_single_block(self):
        assert extract_code_block("intro\n```python\nprint(1)\n```\noutro") == "print(1)\n"

    def test_last_block_wins(self):
        reply = "```python\nold\n```\nactually use this:\n```python\nnew\n```"
        assert extract_code_block(reply) == "new\n"

    def test_prose_only_raises(self):
        with pytest.raises(NoCodeBlock):
            extract_code_block("here is prose only")

    def test_unlabelled_fence(self):
        assert extract_code_block("```\nx = 1\n```") == "x = 1\n"

    def test_round_trip_verbatim(self):
        # any reply with exactly one fenced block gives the block back
        # verbatim, newlines included
        rng = random.Random(23)
        alphabet = string.ascii_letters + string.digits + " \n#()[]:=+-'"
        for _ in range(60):
            block = "".join(rng.choices(alphabet, k=rng.randint(1, 120)))
            if not block.endswith("\n"):
                block += "\n"
            reply = f"prose before\n```python\n{block}```\nprose after"
            assert extract_code_block(reply) == block


class TestGenerateCode:
    def test_first_trial_embeds_experience_without_error_history(self, templates):
        backend = mock_backend(("", coding_reply("print('hi')")))
        code, _ = generate_code(QUESTION, EXPERIENCE, [], backend, templates, UsageLedger())
        assert code == "print('hi')\n"
        prompt = backend.calls[0].user_text
        assert "def search_paths(graph, path):" in prompt
        assert "Here is the error message: None" in prompt
        assert "Attempt 1" not in prompt

    def test_second_trial_embeds_prior_code_and_error(self, templates):
        backend = mock_backend(("", coding_reply("print('fixed')")))
        ledger = UsageLedger()
        history_result = attempt_with_retries(
            QUESTION,
            EXPERIENCE,
            StubExecutor.sequence([fail("NameError: nodes is not defined"), ok("done\n")]),
            2,
            mock_backend(
                ("error message: None", coding_reply("print('broken')")),
                ("", coding_reply("print('fixed')")),
            ),
            templates,
            ledger,
        )
        assert len(history_result.attempts) == 2
        # regenerate the second prompt directly to inspect it
        backend = mock_backend(("", coding_reply("x")))
        generate_code(QUESTION, EXPERIENCE, history_result.attempts[:1], backend, templates, UsageLedger())
        prompt = backend.calls[0].user_text
        assert "print('broken')" in prompt
        assert "NameError: nodes is not defined" in prompt

    def test_prose_reply_raises_no_code_block(self, templates):
        backend = mock_backend(("", "here is prose only"))
        with pytest.raises(NoCodeBlock):
            generate_code(QUESTION, None, [], backend, templates, UsageLedger())

    def test_documentation_knowledge_rendered(self, templates):
        knowledge = RetrievalResult(
            "documentation", [(DocEntry(api_name="has_path", description="reachability"), 0.4)], 0.4
        )
        backend = mock_backend(("", coding_reply("pass")))
        generate_code(QUESTION, knowledge, [], backend, templates, UsageLedger())
        assert "api_name: has_path" in backend.calls[0].user_text

    def test_empty_knowledge_renders_none(self, templates):
        backend = mock_backend(("", coding_reply("pass")))
        generate_code(QUESTION, RetrievalResult("empty"), [], backend, templates, UsageLedger())
        assert "Based on the available search result: None," in backend.calls[0].user_text


class TestAttemptWithRetries:
    def test_success_on_first_trial(self, templates):
        backend = mock_backend(("", coding_reply("print('path')")))
        executor = StubExecutor.sequence([ok("0, 1, 6, 3, 5, 4, 2\n")])
        result = attempt_with_retries(QUESTION, None, executor, 3, backend, templates, UsageLedger())
        assert result.succeeded
        assert result.provenance == "coding"
        assert result.result == "0, 1, 6, 3, 5, 4, 2"
        assert len(result.attempts) == 1
        assert result.attempts[0].error is None

    def test_fail_fail_succeed(self, templates):
        backend = mock_backend(("", coding_reply("print('x')")))
        executor = StubExecutor.sequence([fail("boom one"), fail("boom two"), ok("answer\n")])
        result = attempt_with_retries(QUESTION, None, executor, 3, backend, templates, UsageLedger())
        assert result.succeeded
        assert len(result.attempts) == 3
        assert result.attempts[0].error and result.attempts[1].error
        assert result.attempts[2].error is None
        assert len(executor.calls) == 3
        # the third prompt carried both prior errors
        third_prompt = backend.calls[2].user_text
        assert "boom one" in third_prompt and "boom two" in third_prompt

    def test_all_trials_fail(self, templates):
        backend = mock_backend(("", coding_reply("print('x')")))
        executor = StubExecutor.sequence([fail("e1"), fail("e2"), fail("e3")])
        result = attempt_with_retries(QUESTION, None, executor, 3, backend, templates, UsageLedger())
        assert not result.succeeded
        assert result.result is None
        assert len(result.attempts) == 3
        assert all(a.error for a in result.attempts)

    def test_no_code_block_counts_as_failed_attempt(self, templates):
        backend = mock_backend(
            ("error message: None", "no code this time"),
            ("", coding_reply("print('y')")),
        )
        executor = StubExecutor.sequence([ok("fine\n")])
        result = attempt_with_retries(QUESTION, None, executor, 3, backend, templates, UsageLedger())
        assert result.succeeded
        assert result.attempts[0].error == NO_CODE_ERROR
        assert len(executor.calls) == 1  # nothing executed for the codeless trial

    def test_empty_stdout_triggers_retry(self, templates):
        backend = mock_backend(("", coding_reply("pass")))
        executor = StubExecutor.sequence([ok(""), ok("late answer\n")])
        result = attempt_with_retries(QUESTION, None, executor, 3, backend, templates, UsageLedger())
        assert result.succeeded
        assert result.attempts[0].error == NO_OUTPUT_ERROR
        assert result.result == "late answer"

    def test_error_text_carries_class_and_stderr_tail(self, templates):
        backend = mock_backend(("", coding_reply("pass")))
        long_tail = "x" * 3000 + "TAIL MARKER"
        executor = StubExecutor.sequence([fail(long_tail), fail("short"), fail("short")])
        result = attempt_with_retries(QUESTION, None, executor, 3, backend, templates, UsageLedger())
        first_error = result.attempts[0].error
        assert first_error.startswith("runtime:")
        assert "TAIL MARKER" in first_error
        assert len(first_error) <= len("runtime: ") + 2000

    def test_timeout_classified(self, templates):
        backend = mock_backend(("", coding_reply("while True: pass")))
        executor = StubExecutor.sequence([timed_out()])
        result = attempt_with_retries(QUESTION, None, executor, 1, backend, templates, UsageLedger())
        assert result.attempts[0].error == "timeout"

    def test_attempt_count_and_history_shape(self, templates):
        # over random failure prefixes: attempt count within [1, n_retry]
        # and the n-th prompt holds exactly n-1 prior codes and errors
        rng = random.Random(31)
        for _ in range(30):
            n_retry = rng.randint(1, 4)
            n_failures = rng.randint(0, n_retry)
            outcomes = [fail(f"err-{i}") for i in range(n_failures)]
            if n_failures < n_retry:
                outcomes.append(ok("done\n"))
            backend = mock_backend(("", coding_reply("print('z')")))
            executor = StubExecutor.sequence(outcomes)
            result = attempt_with_retries(QUESTION, None, executor, n_retry, backend, templates, UsageLedger())
            assert 1 <= len(result.attempts) <= n_retry
            for index, prompt_text in enumerate(backend.prompts()):
                assert prompt_text.count("Attempt ") == 2 * index  # one code + one error line per prior attempt

    def test_reproducible_with_fixed_script(self, templates):
        def run():
            backend = mock_backend(("", coding_reply("print('q')")))
            executor = StubExecutor.sequence([fail("e"), ok("out\n")])
            result = attempt_with_retries(QUESTION, None, executor, 3, backend, templates, UsageLedger())
            return [(a.trial_index, a.code, a.result, a.error) for a in result.attempts]

        assert run() == run()


class TestReasonDirectly:
    def test_reply_text_returned(self, templates):
        backend = mock_backend(("", "Yes. The path can be: 0, 1, 6, 5."))
        result = reason_directly(QUESTION, backend, templates, UsageLedger())
        assert result == "Yes. The path can be: 0, 1, 6, 5."

    def test_final_answer_tags_stripped(self, templates):
        backend = mock_backend(("", "thinking...\n<final_answer>\nYes.\n</final_answer>"))
        assert reason_directly(QUESTION, backend, templates, UsageLedger()) == "Yes."

    def test_empty_reply_refused(self, templates):
        backend = mock_backend(("", "<final_answer></final_answer>"))
        with pytest.raises(BackendRefusal):
            reason_directly(QUESTION, backend, templates, UsageLedger())

    def test_absent_output_format_rendered_as_none(self, templates):
        question = NormalizedQuestion(
            refined_question="r", graph_type="undirected", input_data="d", output_format=None
        )
        backend = mock_backend(("", "fine"))
        reason_directly(question, backend, templates, UsageLedger())
        assert "Output_Format: None" in backend.calls[0].user_text
