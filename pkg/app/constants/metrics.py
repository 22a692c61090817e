class Constants:
    class Metric:
        PREFIX = "egograph"
        HUNDRED_SAMPLING_RATE = 1
        INCREMENT_COUNT = 1
        EXTRACTION_LATENCY = "extraction_latency"
        EXTRACTION_COUNT = "extraction_count"
        PARSE_FAULT_COUNT = "parse_fault_count"
        APPLY_LATENCY = "apply_latency"
        ANSWER_LATENCY = "answer_latency"
        ANSWER_COUNT = "answer_count"

    class Tag:
        PATH = "path"
        CATEGORY = "category"
        PROVIDER = "provider"
        OUTCOME = "outcome"
