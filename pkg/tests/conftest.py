"""Shared fixtures: the newsletter fixture task with its rubric and reference
transcript, plus scripted-backend helpers that make every pipeline stage
deterministic and offline."""

from __future__ import annotations

import json

import pytest

from taskmint.config import EngineConfig
from taskmint.gateway import LLMGateway, StubBackend
from taskmint.types import (
    ASSISTANT,
    SYSTEM,
    TOOL_CALL,
    TOOL_RESPONSE,
    USER,
    CanonicalCall,
    ForbiddenConstraint,
    Message,
    ParameterSpec,
    PersonaRecord,
    Rubric,
    SynthTask,
    ToolSpec,
    Trajectory,
    WorkflowStep,
)

AUDIO_URL = "https://example.com/audio/flower_garden.mp3"
IMAGE_URL = "https://example.com/images/marigolds-with-grandchild.jpg"

TRANSCRIBER_RESULT = json.dumps(
    {
        "transcribed_text": "Every spring, I would plant marigolds along the garden path... I feel her joy all over again.",
        "confidence_score": 0.96,
    }
)
QUOTE_RESULT = json.dumps(
    {
        "quote": "They flash upon that inward eye ...",
        "attribution": "William Wordsworth, from 'I Wandered Lonely as a Cloud'",
    }
)
ALT_TEXT_RESULT = json.dumps(
    {"description": "A sunny garden scene with marigolds labelled 'Grandma's Sunshine Patch.'", "success": True}
)
FORMAT_RESULT = json.dumps(
    {"html_output": "<html>newsletter</html>", "preview_url": "https://example.com/preview/newsletter-12"}
)
NARRATION_RESULT = json.dumps(
    {"narration_status": "success", "audio_url": "https://example.com/audio/narration/garden_memory_narrated.mp3"}
)

DURATION_CONSTRAINT = (
    "The agent must not use VoiceTranscriber on audio longer than 90 seconds. A violation occurs if the "
    "agent transcribes without confirming duration, assumes the audio is short enough, or proceeds when "
    "the audio is known or implied to exceed 90 seconds."
)


def make_newsletter_toolset() -> tuple[ToolSpec, ...]:
    string = lambda name, desc, required=True: ParameterSpec(name, "string", desc, required)
    return (
        ToolSpec(
            name="VoiceTranscriber",
            description="Converts short spoken audio clips into punctuated text; designed for seniors with a simple UI.",
            parameters=(string("audio_file_path", "File path or URL to the audio clip (.mp3/.wav)."),),
        ),
        ToolSpec(
            name="LiteratureFinder",
            description="Retrieves a short quote or poem excerpt from a curated public-domain database given a theme keyword.",
            parameters=(string("search_query", "Keyword or theme (e.g., family, memory, grandchild)."),),
        ),
        ToolSpec(
            name="NewsletterFormatter",
            description="Assembles text, image, and quote into an accessible HTML email template with responsive layout and an optional audio link.",
            parameters=(
                string("headline", "Main title of the newsletter."),
                string("body_text", "Main content paragraph."),
                string("image_url", "URL to the featured image."),
                string("quote", "Curated quote or poem excerpt to include."),
                string("attribution", "Attribution formatted as 'Author, Title'."),
                string("question_of_week", "Prompt question to encourage family responses."),
                string("audio_narration_url", "URL to an audio version of the newsletter.", required=False),
            ),
        ),
        ToolSpec(
            name="ImageDescriber",
            description="Generates accessibility-oriented alt-text for a given image URL.",
            parameters=(string("image_url", "URL of the image to be described."),),
        ),
        ToolSpec(
            name="AudioNarrationGenerator",
            description="Simulates converting written text into an audio narration file for accessibility.",
            parameters=(string("text", "The text content to be narrated."),),
        ),
    )


def make_newsletter_task() -> SynthTask:
    return SynthTask(
        task_id="newsletter0001ab",
        persona=PersonaRecord(
            id="persona-caregiver-01",
            description="A family caregiver coordinating weekly updates between a senior resident and younger relatives.",
        ),
        workflow=(
            WorkflowStep(1, "Collect a recent voice update from the senior", ("VoiceTranscriber",)),
            WorkflowStep(2, "Transcribe the voice message", ("VoiceTranscriber",)),
            WorkflowStep(3, "Find a fitting quote about family or memory", ("LiteratureFinder",)),
            WorkflowStep(4, "Prepare the featured photo with alt-text", ("ImageDescriber",)),
            WorkflowStep(5, "Add a question inviting family responses", ()),
            WorkflowStep(6, "Generate an audio narration", ("AudioNarrationGenerator",)),
            WorkflowStep(7, "Assemble the newsletter email", ("NewsletterFormatter",)),
        ),
        toolset=make_newsletter_toolset(),
        forbidden=(ForbiddenConstraint(DURATION_CONSTRAINT),),
        instruction=(
            "Create a weekly digital newsletter for a senior resident that shares personal updates, "
            "meaningful stories, and family prompts in an accessible and heartfelt format."
        ),
        hidden_context=(
            "The senior prefers speaking over typing and can comfortably record short voice messages of up "
            "to 90 seconds. The newsletter should reflect their voice and experiences, include a photo from "
            "their life, and feature a thoughtful quote related to family or memory. Each edition must end "
            "with a gentle question to invite responses from younger family members. The final version must "
            "be delivered as a well-formatted email that displays correctly on phones and tablets, with "
            "optional audio support for low-vision recipients."
        ),
    )


def make_newsletter_rubric(task: SynthTask | None = None) -> Rubric:
    task = task or make_newsletter_task()
    return Rubric(
        task_id=task.task_id,
        forbidden=task.forbidden,
        subgoals=(
            "Obtain a voice update of at most 90 seconds and confirm its duration.",
            "Transcribe the voice message via VoiceTranscriber.",
            "Retrieve a relevant quote via LiteratureFinder.",
            "Include a user-provided image and generate alt-text via ImageDescriber.",
            "Add a family prompt question.",
            "Generate audio narration via AudioNarrationGenerator.",
            "Format the newsletter via NewsletterFormatter.",
        ),
        required_interactions=(
            "Voice message availability, file path, and whether it is under 90 seconds.",
            "Image availability and a valid image URL.",
            "Newsletter theme or focus (memory or story to highlight).",
            "Audience and tone preferences.",
            "Whether audio narration is desired or needed.",
        ),
    )


def tool_call_text(tool: str, args: dict) -> str:
    return f'<tool_call>{json.dumps({"tool": tool, "args": args})}</tool_call>'


# the fixed agent script reproducing the reference episode; each entry is one
# assistant turn fed to the environment in order
NEWSLETTER_AGENT_SCRIPT: tuple[str, ...] = (
    "Could you share the personal update to feature, the theme to highlight, the target audience and "
    "tone, a photo if you have one, and whether audio narration is needed?",
    "Happy to use that voice message. Two details first: is the recording 90 seconds or less, and what "
    "is the .mp3 or .wav link or path?",
    tool_call_text("VoiceTranscriber", {"audio_file_path": AUDIO_URL}),
    tool_call_text("LiteratureFinder", {"search_query": "garden and memory"}),
    "Do you have a featured image to include? A URL works best.",
    tool_call_text("ImageDescriber", {"image_url": IMAGE_URL}),
    tool_call_text(
        "NewsletterFormatter",
        {
            "headline": "Planting Marigolds, Growing Memories",
            "body_text": "Every spring, I would plant marigolds along the garden path...",
            "image_url": IMAGE_URL,
            "quote": "They flash upon that inward eye ...",
            "attribution": "William Wordsworth, from 'I Wandered Lonely as a Cloud'",
            "question_of_week": "What garden, flower, or outdoor tradition brings back warm childhood memories for you?",
        },
    ),
    tool_call_text("AudioNarrationGenerator", {"text": "Planting Marigolds, Growing Memories. Every spring, ..."}),
    "<answer>The newsletter is generated with an HTML preview, and an audio narration link is included "
    "for accessibility.</answer>",
)

# scripted user-simulator replies, anchored to the question line of the
# user-simulator prompt so earlier questions in the transcript cannot shadow
# later ones (none quotes a hidden-context sentence verbatim)
NEWSLETTER_USER_RULES: tuple[tuple[str, str], ...] = (
    (
        r"asked:\n[^\n]*personal update to feature",
        "The senior recorded a short voice message about planting flowers in the garden with a grandchild. "
        "Would you like to transcribe that as the personal update? Keep it warm and simple for the grandkids, "
        "and yes, please add narration for low-vision readers.",
    ),
    (
        r"asked:\n[^\n]*90 seconds or less",
        f"Yes, it is 85 seconds and here is the .mp3 link: {AUDIO_URL}.",
    ),
    (
        r"asked:\n[^\n]*featured image",
        f"Image link: {IMAGE_URL}.",
    ),
)

# scripted teacher/policy agent: each rule keys on the environment's latest
# reply and emits the next assistant turn of the reference episode
NEWSLETTER_AGENT_RULES: tuple[tuple[str, str], ...] = (
    (r"^Create a weekly digital newsletter", NEWSLETTER_AGENT_SCRIPT[0]),
    (r"senior recorded a short voice message", NEWSLETTER_AGENT_SCRIPT[1]),
    (r"it is 85 seconds", NEWSLETTER_AGENT_SCRIPT[2]),
    (r"transcribed_text", NEWSLETTER_AGENT_SCRIPT[3]),
    (r'"quote"', NEWSLETTER_AGENT_SCRIPT[4]),
    (r"^Image link:", NEWSLETTER_AGENT_SCRIPT[5]),
    (r'"description"', NEWSLETTER_AGENT_SCRIPT[6]),
    (r"preview_url", NEWSLETTER_AGENT_SCRIPT[7]),
    (r"narration_status", NEWSLETTER_AGENT_SCRIPT[8]),
)


def newsletter_episode_rules() -> list[tuple[str, str]]:
    """Full rule set for scripted end-to-end episodes: simulators first (their
    prompts carry distinctive markers), then the agent keyed on env replies."""
    return list(NEWSLETTER_TOOL_RULES) + list(NEWSLETTER_USER_RULES) + list(NEWSLETTER_AGENT_RULES)

# scripted tool-simulator replies, matched against the rendered call
NEWSLETTER_TOOL_RULES: tuple[tuple[str, str], ...] = (
    (r"You simulate the execution.*Incoming call:\nVoiceTranscriber\(", f"NEW\n{TRANSCRIBER_RESULT}"),
    (r"You simulate the execution.*Incoming call:\nLiteratureFinder\(", f"NEW\n{QUOTE_RESULT}"),
    (r"You simulate the execution.*Incoming call:\nImageDescriber\(", f"NEW\n{ALT_TEXT_RESULT}"),
    (r"You simulate the execution.*Incoming call:\nNewsletterFormatter\(", f"NEW\n{FORMAT_RESULT}"),
    (r"You simulate the execution.*Incoming call:\nAudioNarrationGenerator\(", f"NEW\n{NARRATION_RESULT}"),
)


def make_reference_trajectory(task: SynthTask | None = None) -> Trajectory:
    """The reference episode as a handcrafted transcript (system prompt elided)."""
    task = task or make_newsletter_task()
    script = NEWSLETTER_AGENT_SCRIPT
    msgs: list[Message] = [
        Message(SYSTEM, "system prompt", turn=0),
        Message(USER, task.instruction, turn=1),
        Message(ASSISTANT, script[0], turn=2),
        Message(
            USER,
            "The senior recorded a short voice message about planting flowers in the garden with a grandchild.",
            turn=3,
        ),
        Message(ASSISTANT, script[1], turn=4),
        Message(USER, f"Yes, it is 85 seconds and here is the .mp3 link: {AUDIO_URL}.", turn=5),
        Message(TOOL_CALL, script[2], call=CanonicalCall("VoiceTranscriber", {"audio_file_path": AUDIO_URL}), turn=6),
        Message(TOOL_RESPONSE, TRANSCRIBER_RESULT, turn=7),
        Message(TOOL_CALL, script[3], call=CanonicalCall("LiteratureFinder", {"search_query": "garden and memory"}), turn=8),
        Message(TOOL_RESPONSE, QUOTE_RESULT, turn=9),
        Message(ASSISTANT, script[4], turn=10),
        Message(USER, f"Image link: {IMAGE_URL}.", turn=11),
        Message(TOOL_CALL, script[5], call=CanonicalCall("ImageDescriber", {"image_url": IMAGE_URL}), turn=12),
        Message(TOOL_RESPONSE, ALT_TEXT_RESULT, turn=13),
        Message(
            TOOL_CALL,
            script[6],
            call=CanonicalCall(
                "NewsletterFormatter",
                {
                    "headline": "Planting Marigolds, Growing Memories",
                    "body_text": "Every spring, I would plant marigolds along the garden path...",
                    "image_url": IMAGE_URL,
                    "quote": "They flash upon that inward eye ...",
                    "attribution": "William Wordsworth, from 'I Wandered Lonely as a Cloud'",
                    "question_of_week": "What garden, flower, or outdoor tradition brings back warm childhood memories for you?",
                },
            ),
            turn=14,
        ),
        Message(TOOL_RESPONSE, FORMAT_RESULT, turn=15),
        Message(
            TOOL_CALL,
            script[7],
            call=CanonicalCall("AudioNarrationGenerator", {"text": "Planting Marigolds, Growing Memories. Every spring, ..."}),
            turn=16,
        ),
        Message(TOOL_RESPONSE, NARRATION_RESULT, turn=17),
        Message(ASSISTANT, script[8], turn=18),
    ]
    return Trajectory(
        task_id=task.task_id,
        messages=tuple(msgs),
        final_answer="The newsletter is generated with an HTML preview, and an audio narration link is included for accessibility.",
        terminated_reason="answered",
    )


def all_satisfied_judge_rules() -> list[tuple[str, str]]:
    """Judge stub marking every rubric item satisfied and every constraint clean."""
    return [
        (r"Judge whether the transcript violates the rule below", "CLEAN"),
        (r"Judge whether the transcript achieves the subgoal", "SATISFIED"),
        (r"Judge whether the assistant in the transcript performed", "SATISFIED"),
    ]


def make_gateway(rules, **kwargs) -> LLMGateway:
    return LLMGateway(StubBackend(rules), retries=0, backoff_s=0.0, **kwargs)


@pytest.fixture
def config() -> EngineConfig:
    return EngineConfig()


@pytest.fixture
def newsletter_task() -> SynthTask:
    return make_newsletter_task()


@pytest.fixture
def newsletter_rubric(newsletter_task) -> Rubric:
    return make_newsletter_rubric(newsletter_task)


@pytest.fixture
def reference_trajectory(newsletter_task) -> Trajectory:
    return make_reference_trajectory(newsletter_task)
