def format_prompt(template: str, **kwargs) -> str:
    """
    Replace ``{{name}}`` placeholders in ``template`` with the given values.

    Single braces are left alone, so templates may contain literal JSON.

    Example:
        >>> format_prompt("Summarize {{element_name}}", element_name="Kitchen")
        'Summarize Kitchen'
    """
    result = template
    for key, value in kwargs.items():
        placeholder = "{{{{%s}}}}" % key
        result = result.replace(placeholder, str(value))
    return result
