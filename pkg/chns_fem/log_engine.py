from inspy_logger import InspyLogger, Loggable


ROOT_LOGGER = InspyLogger('CHNSFem', console_level='info', no_file_logging=True)


def set_console_level(level: str):
    """
    Adjust the console level of the root logger (and therefore every child logger).

    Parameters:
        level (str):
            One of 'debug', 'info', 'warning', 'error'.
    """
    setter = getattr(ROOT_LOGGER, 'set_level', None)
    if setter is not None:
        setter(console_level=level.lower())
    else:
        ROOT_LOGGER.logger.setLevel(level.upper())


__all__ = [
    'Loggable',
    'ROOT_LOGGER',
    'set_console_level',
]
""" List of exported classes and functions for exposure to the public. """
