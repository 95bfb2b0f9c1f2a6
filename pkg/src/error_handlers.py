import logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_PIPELINE_ERROR = 2


def handle_invalid_input(err):
    """Handles InvalidInput (bad files, flags or config values) as exit code 1."""
    logger.error('Input error: %s', err)
    return EXIT_INPUT_ERROR


def handle_pipeline_error(err):
    """Handles PipelineError (a stage failed on well-formed input) as exit code 2."""
    logger.error('Pipeline error: %s', err)
    return EXIT_PIPELINE_ERROR


def handle_os_error(err):
    """Handles unreadable inputs and unwritable destinations as exit code 1."""
    logger.error('I/O error: %s', err)
    return EXIT_INPUT_ERROR


def handle_unexpected(err):
    """Handles anything else as a pipeline failure, keeping the traceback in the log."""
    logger.error('Unexpected error: %s', err, exc_info=err)
    return EXIT_PIPELINE_ERROR


class HandlerRegistry:
    """Maps exception types to handlers; lookup walks the exception's MRO."""

    def __init__(self):
        self._handlers = {}

    def register_error_handler(self, exc_type, handler):
        self._handlers[exc_type] = handler

    def handle(self, err):
        for klass in type(err).__mro__:
            handler = self._handlers.get(klass)
            if handler is not None:
                return handler(err)
        raise err


def register_error_handlers(registry):
    """Registers all error handlers with the CLI's registry."""
    from src.exceptions import InvalidInput, PipelineError
    registry.register_error_handler(InvalidInput, handle_invalid_input)
    registry.register_error_handler(PipelineError, handle_pipeline_error)
    registry.register_error_handler(OSError, handle_os_error)
    registry.register_error_handler(Exception, handle_unexpected)
    return registry
