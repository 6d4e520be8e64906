"""FastAPI application package for MVKTrans."""
