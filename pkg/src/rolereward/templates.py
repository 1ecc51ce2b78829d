"""Default judge prompt templates.

These are editable defaults: the upstream judging models' exact prompts are
not published, so each deployment is expected to tune the wording. Pipelines
look templates up by id so a replacement registry can be swapped in wholesale.
"""

from __future__ import annotations

from typing import Mapping

from .judge import OutputContract, PromptTemplate

_T = PromptTemplate


def _registry(templates: list[PromptTemplate]) -> dict[str, PromptTemplate]:
    return {t.id: t for t in templates}


DEFAULT_TEMPLATES: Mapping[str, PromptTemplate] = _registry(
    [
        _T(
            "stv_extract",
            "你是角色扮演训练数据的标注助手。下面是一次对话中的提问和若干参考回答。"
            "请从参考回答中提取能够唯一证明回答正确的关键词（名词性、指代明确的实体或数值）。\n"
            "提问：{question}\n参考回答：\n{references}\n"
            "只输出关键词本身，多个关键词用逗号分隔，不要输出任何解释。",
            OutputContract.KEYWORD_LIST,
        ),
        _T(
            "entity_check",
            "判断下面的关键词是否是一个名词性的、指代明确且唯一的实体（人名、地名、数量、事物名等）。\n"
            "提问：{question}\n关键词：{keyword}\n"
            "只回答“是”或“否”。",
            OutputContract.YES_NO,
        ),
        _T(
            "expand",
            "下面是用于校验回答正确性的关键词。请列出与它们语义等价的变体写法（同义词、别称、不同表述）。\n"
            "提问：{question}\n关键词：{keywords}\n"
            "只输出变体关键词，用逗号分隔，不要输出任何解释。",
            OutputContract.KEYWORD_LIST,
        ),
        _T(
            "legitimacy",
            "判断下面的关键词在该语境中是否与正确回答相关、可以作为正确性依据。\n"
            "语境：{context}\n关键词：{keyword}\n"
            "只回答“是”或“否”。",
            OutputContract.YES_NO,
        ),
        _T(
            "gen_expression",
            "请基于下面的候选关键词，写一个布尔校验表达式，用于判断一段回答是否正确。\n"
            "语法：contains(\"词\")、count_at_least(\"词\", 次数)、not(表达式)、"
            "all(表达式, 表达式, ...)、any(表达式, 表达式, ...)。\n"
            "表达式中的字符串只能取自候选关键词：{variants}\n"
            "只输出表达式本身，不要输出任何解释。",
            OutputContract.DSL_EXPRESSION,
        ),
        _T(
            "probe_judge",
            "下面是一次角色扮演对话中的提问和一条模型回答。结合应包含的关键信息，判断这条回答是否正确。\n"
            "提问：{question}\n关键信息：{keywords}\n回答：{response}\n"
            "只回答“是”或“否”。",
            OutputContract.YES_NO,
        ),
        _T(
            "cot_compress",
            "下面是一段角色内心独白式的思考过程。请在保留逻辑衔接、对话历史信息和角色设定信息的前提下压缩它，"
            "删除低信息量的元指令。直接输出压缩后的思考过程。\n思考过程：\n{cot}",
            OutputContract.FREE_TEXT,
        ),
        _T(
            "cot_style",
            "请把下面的思考过程改写成符合该角色口吻的第一人称内心独白，保持语义不变，不要使用任何括号注释。\n"
            "角色设定：{profile}\n思考过程：\n{cot}",
            OutputContract.FREE_TEXT,
        ),
        _T(
            "cot_continue",
            "你正在扮演一个角色。根据对话历史和你的内心独白，给出这个角色接下来的回复。只输出回复本身。\n"
            "对话历史：\n{history}\n内心独白：\n{cot}",
            OutputContract.FREE_TEXT,
        ),
        _T(
            "baseline_answer",
            "你正在扮演下面的角色。根据角色设定和对话历史回答用户的提问，直接输出回答。\n"
            "角色设定：{profile}\n对话历史：\n{history}\n提问：{question}",
            OutputContract.FREE_TEXT,
        ),
        _T(
            "hard_check",
            "下面是一次角色扮演对话中的提问、一条模型回答和参考回答。判断模型回答是否正确。\n"
            "提问：{question}\n模型回答：{answer}\n参考回答：\n{references}\n"
            "只回答“是”或“否”。",
            OutputContract.YES_NO,
        ),
        _T(
            "gen_question",
            "根据下面的角色设定和对话历史，提出一个关于角色记忆或设定细节的提问，答案应当是明确的。只输出提问。\n"
            "角色设定：{profile}\n对话历史：\n{history}",
            OutputContract.FREE_TEXT,
        ),
        _T(
            "eval_sbk",
            "你是角色扮演对话的评测员。评测维度：剧本知识（回答是否符合角色档案中的既有事实）。\n"
            "评测目标：{objective}\n参考回答：{reference}\n模型回答：{response}\n"
            "模型回答是否正确？只回答“是”或“否”。",
            OutputContract.YES_NO,
        ),
        _T(
            "eval_cm",
            "你是角色扮演对话的评测员。评测维度：对话记忆（回答是否与对话历史中提到的信息一致）。\n"
            "评测目标：{objective}\n参考回答：{reference}\n模型回答：{response}\n"
            "模型回答是否正确？只回答“是”或“否”。",
            OutputContract.YES_NO,
        ),
        _T(
            "eval_sck",
            "你是角色扮演对话的评测员。评测维度：剧本矛盾知识（回答是否恰当处理与角色档案矛盾的信息）。\n"
            "评测目标：{objective}\n参考回答：{reference}\n模型回答：{response}\n"
            "模型回答是否正确？只回答“是”或“否”。",
            OutputContract.YES_NO,
        ),
        _T(
            "eval_rcb",
            "你是角色扮演对话的评测员。评测维度：角色认知边界（回答是否守住角色应知/不应知的边界）。\n"
            "评测目标：{objective}\n参考回答：{reference}\n模型回答：{response}\n"
            "模型回答是否正确？只回答“是”或“否”。",
            OutputContract.YES_NO,
        ),
        _T(
            "eval_ta",
            "你是角色扮演对话的评测员。评测维度：话题推进（回答是否推动了当前话题）。\n"
            "评测目标：{objective}\n参考回答：{reference}\n模型回答：{response}\n"
            "模型回答是否正确？只回答“是”或“否”。",
            OutputContract.YES_NO,
        ),
        _T(
            "eval_ts",
            "你是角色扮演对话的评测员。评测维度：话题转换（回答是否恰当完成了话题转换）。\n"
            "评测目标：{objective}\n参考回答：{reference}\n模型回答：{response}\n"
            "模型回答是否正确？只回答“是”或“否”。",
            OutputContract.YES_NO,
        ),
    ]
)


def get_template(template_id: str, templates: Mapping[str, PromptTemplate] | None = None) -> PromptTemplate:
    registry = DEFAULT_TEMPLATES if templates is None else templates
    try:
        return registry[template_id]
    except KeyError:
        raise KeyError(f"no prompt template with id {template_id!r}") from None


def render_history(dialogue_history: tuple[tuple[str, str], ...] | list) -> str:
    """One line per turn, "speaker: utterance"."""
    return "\n".join(f"{speaker}: {utterance}" for speaker, utterance in dialogue_history)
