"""Shape descriptions, report records and the exception hierarchy."""
