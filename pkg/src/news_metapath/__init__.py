"""
Обнаружение фейковых новостей по мета-путям гетерогенного графа
"""

__version__ = "0.1.0"
