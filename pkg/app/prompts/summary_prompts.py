DESCRIPTION_SUMMARY_PROMPT = """---Goal---
You are maintaining a temporal knowledge graph built from first-person video captions.
The element "{{element_name}}" has accumulated many timestamped observations.
Condense the observations below into one short paragraph that keeps habits, recurring places,
owners and any changes of state. Keep timestamps that mark a change.
Use {{language}} as output language.

---Observations---
{{observations}}

Summary:"""
