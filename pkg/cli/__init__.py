"""Command-line interface of hmil: ``gen``, ``train``, ``eval``, ``gradcheck`` and ``compare``."""
