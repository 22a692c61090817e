KEYWORD_EXTRACTION_PROMPT = """---Role---
You extract search keywords from a question about a person's recorded daily life.

---Goal---
Return two lists:
- "high_level_keywords": overarching concepts or themes of the question (activities, habits, routines)
- "low_level_keywords": specific entities the question names (people, objects, places, events)

Reply with a single JSON object and nothing else, for example:
{"high_level_keywords": ["daily routine", "cooking"], "low_level_keywords": ["Alice", "kitchen"]}

---Question---
{{query}}

JSON:"""
