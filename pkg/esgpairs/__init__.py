"""ESGPairs: ESG-отбор универсума и парный трейдинг на коинтегрированных парах."""

__version__ = '1.0.0'
