from django.contrib import admin

from .models import FittedEnsemble


@admin.register(FittedEnsemble)
class FittedEnsembleAdmin(admin.ModelAdmin):
    list_display = ('name', 'mode', 't_star', 'cause', 'created_at')
    list_filter = ('mode', 'created_at')
    search_fields = ('name',)
    readonly_fields = ('payload', 'created_at')
