class ModelLoadError(Exception):
    """The checkpoint or its tokenizer could not be loaded."""


class ExtractionError(Exception):
    """Extraction could not proceed or produced invalid tensors."""
