"""Mine commit and issue-tracker activity of project cohorts and compare them."""

__version__ = "0.1.0"
