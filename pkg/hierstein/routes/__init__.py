__all__ = []